"""Command-line driver: exact suites, symbol sweeps, the instanton flow and basic cohomology.

Exit codes: 0 every check passed, 1 a check failed, 2 usage or configuration error.
Every command builds one JSON report validated against ``report_schema.json``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import algebra_suite
from . import gauge_flow as gf
from . import transverse_lattice as tl
from .exterior_core import e
from .lie_forms import algebra_by_name
from .symbol_checker import exactness_sweep

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SCHEMA_ID = "contactgauge.report/1"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int = 3
    algebra: str = "su2"
    seed: int = 7
    mode: str = "spectral"
    amplitude: float = 0.1
    band_limit: int = -1            # Fourier cutoff of the random perturbation, -1 for none
    max_iter: int = 500
    tol: float = 1e-8
    direction: str = "lbfgs"
    memory: int = 10
    method: str = "auto"
    cap: int = tl.DEFAULT_CAP
    samples: int = 1000
    complex: str = "both"
    covector: str = "random"
    groups: list | None = None
    predicate_tol: float = 1e-10
    out: str | None = None

    def validate(self) -> None:
        checks = [
            (2 <= self.n <= 8, "n must be in 2..8"),
            (self.mode in ("spectral", "central"), "mode must be spectral or central"),
            (self.amplitude >= 0, "amplitude must be non-negative"),
            (self.max_iter >= 0, "max_iter must be non-negative"),
            (self.tol >= 0, "tol must be non-negative"),
            (self.direction in ("lbfgs", "gradient"), "direction must be lbfgs or gradient"),
            (self.method in ("auto", "modes", "dense"), "method must be auto, modes or dense"),
            (self.cap > 0, "cap must be positive"),
            (self.samples >= 1, "samples must be >= 1"),
            (self.complex in ("extended", "L", "both"), "complex must be extended, L or both"),
            (self.covector in ("random", "e1"), "covector must be random or e1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        try:
            algebra_by_name(self.algebra)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"unknown algebra {self.algebra!r}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return raw


def build_config(args) -> RunConfig:
    values = load_config(args.config) if getattr(args, "config", None) else {}
    for key in ("n", "seed", "mode", "out"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    for key in ("samples", "complex", "covector", "method", "groups"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    types = {f.name: f.type for f in fields(RunConfig)}
    for key, val in values.items():
        want = types[key]
        if want == "int" and (not isinstance(val, int) or isinstance(val, bool)):
            raise ConfigError(f"{key} must be an integer")
        if want == "float" and not isinstance(val, (int, float)):
            raise ConfigError(f"{key} must be a number")
        if want == "str" and not isinstance(val, str):
            raise ConfigError(f"{key} must be a string")
    cfg.validate()
    return cfg


# -- reports -------------------------------------------------------------------------------

def _jsonable(x):
    """Plain JSON types; non-finite floats become strings so the output is strict JSON."""
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def load_schema() -> dict:
    text = resources.files(__package__).joinpath("report_schema.json").read_text()
    return json.loads(text)


def make_report(command: str, cfg: RunConfig, rows, data: dict, warnings=(), usage_error=False) -> dict:
    rows = [r.to_dict() if hasattr(r, "to_dict") else r for r in rows]
    passed = all(r["passed"] for r in rows)
    code = EXIT_USAGE if usage_error else (EXIT_OK if passed else EXIT_FAIL)
    rep = {
        "schema": SCHEMA_ID,
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_dict(),
        "passed": passed and not usage_error,
        "exit_code": code,
        "rows": rows,
        "warnings": list(warnings),
        "data": data,
    }
    rep = _jsonable(rep)
    jsonschema.validate(rep, load_schema())
    return rep


def render_text(rep: dict) -> str:
    lines = [f"{rep['command']}: {'PASS' if rep['passed'] else 'FAIL'} "
             f"({sum(r['passed'] for r in rep['rows'])}/{len(rep['rows'])} checks)"]
    for w in rep["warnings"]:
        lines.append(f"warning: {w}")
    d = rep["data"]
    if rep["command"] == "cohomology":
        lines.append(f"  h_B = {[d['h0_B'], d['h1_B'], d['h2_B']]}  h = {d['h']}  index_T = {d['index_T']}"
                     f"  rank(omega ^) = {d['rank_omega_cup']}")
    elif rep["command"] == "flow":
        lines.append(f"  status {d['status']} after {d['iterations']} iterations, energy {d['final_energy']:.3e}")
    for r in rep["rows"]:
        mark = "ok  " if r["passed"] else "FAIL"
        tail = f"  [{r['detail']}]" if r["detail"] and not r["passed"] else ""
        lines.append(f"  {mark} {r['anchor']} :: {r['name']}{tail}")
    return "\n".join(lines)


def _row(group, anchor, name, ok, detail=""):
    return {"group": group, "anchor": anchor, "name": name, "passed": bool(ok), "detail": detail}


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- commands ------------------------------------------------------------------------------

def cmd_verify_algebra(cfg: RunConfig, flip_orientation: bool = False) -> dict:
    if flip_orientation:
        with algebra_suite.flipped_orientation():
            suite = algebra_suite.run_suite(cfg.groups, n_random=cfg.samples, seed=cfg.seed)
    else:
        suite = algebra_suite.run_suite(cfg.groups, n_random=cfg.samples, seed=cfg.seed)
    data = {"n_checks": len(suite.rows), "n_failed": len(suite.failures()),
            "orientation_flipped": flip_orientation}
    return make_report("verify-algebra", cfg, suite.rows, data, suite.warnings)


def cmd_verify_symbols(cfg: RunConfig) -> dict:
    which = ["extended", "L"] if cfg.complex == "both" else [cfg.complex]
    rows, data = [], {}
    anchors = {"extended": "symbol exactness of the extended d7 complex",
               "L": "symbol exactness of the quotient deformation complex"}
    for w in which:
        if cfg.covector == "e1":
            rep = exactness_sweep(1, cfg.seed, w, covectors=[e(1)])
        else:
            rep = exactness_sweep(cfg.samples, cfg.seed, w)
        d = rep.to_dict()
        d.pop("seconds")
        data[w] = d
        rows.append(_row(f"symbols_{w}", anchors[w], f"{rep.n} covectors give exact symbol sequences",
                         not rep.failures, f"{len(rep.failures)} non-exact covectors"))
    return make_report("verify-symbols", cfg, rows, data)


def _flow_start(cfg: RunConfig) -> tl.Connection:
    grid = tl.Grid(cfg.n, cfg.mode)
    alg = algebra_by_name(cfg.algebra)
    rng = np.random.default_rng(cfg.seed)
    kmax = None if cfg.band_limit < 0 else cfg.band_limit
    return tl.random_connection(rng, grid, alg, kmax=kmax, amplitude=cfg.amplitude)


def cmd_flow(cfg: RunConfig) -> dict:
    out = Path(cfg.out or "contactgauge_flow")
    A0 = _flow_start(cfg)
    fc = gf.FlowConfig(max_iter=cfg.max_iter, tol=cfg.tol, direction=cfg.direction, memory=cfg.memory)
    state = gf.sdci_flow(A0, fc)
    hist = state.energy_history
    monotone = all(b <= a for a, b in zip(hist, hist[1:]))
    preds = gf.pointwise_predicates(state.A, cfg.predicate_tol)
    split = gf.endpoint_split(state.A)
    out.mkdir(parents=True, exist_ok=True)
    state.to_csv(out / "energy.csv")
    tl.save_field(state.A.field, out / "connection.json")
    write_json(out / "predicates.json", _jsonable(preds))
    write_json(out / "state.json", _jsonable(state.to_dict()))
    anchor = "selfdual contact instanton flow"
    rows = [
        _row("flow", anchor, f"energy <= {cfg.tol:g} within {cfg.max_iter} iterations",
             state.converged, f"status {state.status}, residual {state.residual:.3e}"),
        _row("flow", anchor, "energy history is non-increasing", monotone),
        _row("flow", "pointwise instanton predicates", "vectorized residuals agree with the exact predicates",
             preds["oracle_discrepancy"] <= 1e-10 * (1.0 + preds["max_curvature"]),
             f"discrepancy {preds['oracle_discrepancy']:.2e}"),
    ]
    data = {"status": state.status, "iterations": state.iteration, "residual": state.residual,
            "initial_energy": hist[0], "final_energy": hist[-1], "endpoint_split": split,
            "predicates": preds,
            "artifacts": ["energy.csv", "connection.json", "predicates.json", "state.json"]}
    rep = make_report("flow", cfg, rows, data)
    write_json(out / "report.json", rep)
    return rep


def cmd_cohomology(cfg: RunConfig) -> dict:
    grid = tl.Grid(cfg.n, cfg.mode)
    A = tl.Connection.zero(grid, algebra_by_name(cfg.algebra))
    rep = gf.cohomology_dims(A, cap=cfg.cap, method=cfg.method)
    anchor = "basic cohomology of the flat background"
    ch = rep.checks
    rows = [
        _row("cohomology", anchor, "every rank cut has a singular-value gap >= 1e3", not rep.indeterminate),
        _row("cohomology", "first cohomology equals basic first cohomology", "dim H^1 = dim H^1_B",
             ch["h1_equals_h1_B"], f"h = {rep.h}, h_B = {[rep.h0_B, rep.h1_B, rep.h2_B]}"),
        _row("cohomology", "wedge with omega on basic classes", "omega ^ : H^0_B -> H^2_B is injective",
             ch["omega_cup_injective"], f"rank {rep.rank_omega_cup}, h0_B {rep.h0_B}"),
        _row("cohomology", "Gysin sequence", "dim H^0 = h0_B", ch["gysin_h0"]),
        _row("cohomology", "Gysin sequence", "dim H^2 = h2_B - h0_B + h1_B", ch["gysin_h2"]),
        _row("cohomology", "Gysin sequence", "dim H^3 = h2_B", ch["gysin_h3"]),
        _row("cohomology", "transverse index", "index_T = h0_B - h1_B + h2_B", ch["index_relation"]),
        _row("cohomology", "basic complex", "D_1 D_0 = 0 as assembled blocks",
             ch["basic_complex_residual"] <= 1e-10, f"{ch['basic_complex_residual']:.2e}"),
    ]
    data = rep.to_dict()
    data.pop("singular_values")
    data["rank_cuts"] = {k: {kk: vv for kk, vv in v.items() if kk != "cut"} for k, v in rep.singular_values.items()}
    rep_out = make_report("cohomology", cfg, rows, data)
    if rep.indeterminate:
        rep_out["exit_code"] = EXIT_FAIL
        rep_out["passed"] = False
    return rep_out


# -- argument parsing ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file of RunConfig keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int, help="grid size per axis, or the sample count for verify-symbols")
    common.add_argument("--out", help="output directory")
    common.add_argument("--mode", choices=["spectral", "central"])
    common.add_argument("--json", action="store_true", help="print the JSON report")

    p = _Parser(prog="contactgauge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    va = sub.add_parser("verify-algebra", parents=[common], help="exact identity suite")
    va.add_argument("--groups", type=lambda s: [g for g in s.split(",") if g],
                    help=f"comma-separated subset of: {', '.join(algebra_suite.GROUPS)}")
    va.add_argument("--samples", type=int, help="random samples for the instanton group")
    va.add_argument("--flip-orientation", action="store_true", help=argparse.SUPPRESS)
    vs = sub.add_parser("verify-symbols", parents=[common], help="symbol exactness sweep")
    vs.add_argument("--complex", choices=["extended", "L", "both"])
    vs.add_argument("--covector", choices=["random", "e1"])
    sub.add_parser("flow", parents=[common], help="selfdual instanton flow")
    co = sub.add_parser("cohomology", parents=[common], help="basic cohomology at the flat connection")
    co.add_argument("--method", choices=["auto", "modes", "dense"])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    if args.command == "verify-symbols" and args.n is not None:
        if args.n < 1:
            print("contactgauge: error: --n must be >= 1", file=sys.stderr)
            return EXIT_USAGE
        args.samples, args.n = args.n, None
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"contactgauge: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        if args.command == "verify-algebra":
            rep = cmd_verify_algebra(cfg, args.flip_orientation)
        elif args.command == "verify-symbols":
            rep = cmd_verify_symbols(cfg)
        elif args.command == "flow":
            rep = cmd_flow(cfg)
        else:
            rep = cmd_cohomology(cfg)
    except tl.SizeCapExceeded as exc:
        print(f"contactgauge: size cap exceeded: {exc}", file=sys.stderr)
        return EXIT_USAGE
    elapsed = time.perf_counter() - t0
    if cfg.out and args.command != "flow":
        write_json(Path(cfg.out) / "report.json", rep)
    if args.json:
        print(json.dumps(rep, indent=2, sort_keys=True))
    else:
        print(render_text(rep))
        print(f"elapsed {elapsed:.2f} s")
    for w in rep["warnings"]:
        print(f"contactgauge: warning: {w}", file=sys.stderr)
    return rep["exit_code"]
