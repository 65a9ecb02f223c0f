import json
from pathlib import Path

import jsonschema
import pytest

from contactgauge.cli_reports import (
    EXIT_FAIL, EXIT_OK, EXIT_USAGE, ConfigError, RunConfig, cmd_verify_algebra, load_config,
    load_schema, main, make_report, render_text,
)

GOLDEN = Path(__file__).parent / "golden"


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _strip_timestamp(rep):
    rep = dict(rep)
    rep.pop("timestamp")
    return rep


def test_render_matches_golden_text():
    rep = cmd_verify_algebra(RunConfig(groups=["star_sigma"]))
    assert render_text(rep) + "\n" == (GOLDEN / "verify_algebra_star_sigma.txt").read_text()


def test_verify_algebra_exit_codes(capsys):
    code, out, _ = _run(capsys, "verify-algebra", "--groups", "eigenspaces,action_table")
    assert code == EXIT_OK and "PASS" in out
    code, out, _ = _run(capsys, "verify-algebra", "--groups", "star_sigma")
    assert code == EXIT_FAIL and "FAIL" in out


def test_empty_selection_warns(capsys):
    code, out, err = _run(capsys, "verify-algebra", "--groups", "nonsense")
    assert code == EXIT_OK
    assert "unknown groups ignored: nonsense" in err
    assert "no check groups selected" in err


def test_flipped_orientation_changes_verdicts(capsys):
    code, out, _ = _run(capsys, "verify-algebra", "--groups", "star_sigma,eigenspaces", "--json",
                        "--flip-orientation")
    rep = json.loads(out)
    assert code == EXIT_FAIL and rep["data"]["orientation_flipped"]
    by_name = {r["name"]: r["passed"] for r in rep["rows"]}
    assert by_name["*sigma = 1/2 omega^2"]
    assert not all(r["passed"] for r in rep["rows"] if r["group"] == "eigenspaces")
    # the flip is scoped to the command
    _, out, _ = _run(capsys, "verify-algebra", "--groups", "eigenspaces", "--json")
    assert json.loads(out)["passed"]


def test_reports_validate_against_schema(capsys, tmp_path):
    code, out, _ = _run(capsys, "verify-symbols", "--n", "5", "--json", "--out", str(tmp_path))
    rep = json.loads(out)
    jsonschema.validate(rep, load_schema())
    assert rep["exit_code"] == code
    on_disk = json.loads((tmp_path / "report.json").read_text())
    assert _strip_timestamp(on_disk) == _strip_timestamp(rep)
    bad = dict(rep, extra=1)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, load_schema())


def test_reports_are_deterministic(capsys):
    _, a, _ = _run(capsys, "verify-symbols", "--n", "20", "--seed", "3", "--json")
    _, b, _ = _run(capsys, "verify-symbols", "--n", "20", "--seed", "3", "--json")
    assert _strip_timestamp(json.loads(a)) == _strip_timestamp(json.loads(b))


def test_verify_symbols_usage_and_horizontal_covector(capsys):
    code, _, err = _run(capsys, "verify-symbols", "--n", "0")
    assert code == EXIT_USAGE and "--n must be >= 1" in err
    code, out, _ = _run(capsys, "verify-symbols", "--covector", "e1", "--json")
    rep = json.loads(out)
    assert code == EXIT_FAIL
    assert rep["data"]["extended"]["rows"][0]["kernel_dims"][1] == 5


def test_usage_errors(capsys, tmp_path):
    assert _run(capsys, "frobnicate")[0] == EXIT_USAGE
    assert _run(capsys, "flow", "--config", str(tmp_path / "missing.toml"))[0] == EXIT_USAGE
    cfg = tmp_path / "bad.toml"
    cfg.write_text("n = 3\nwibble = 1\n")
    code, _, err = _run(capsys, "flow", "--config", str(cfg))
    assert code == EXIT_USAGE and "wibble" in err
    cfg.write_text('n = "three"\n')
    assert _run(capsys, "flow", "--config", str(cfg))[0] == EXIT_USAGE
    assert _run(capsys, "flow", "--n", "12")[0] == EXIT_USAGE


def test_config_loading(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('n = 4\nalgebra = "u1"\ntol = 1e-6\n')
    assert load_config(p) == {"n": 4, "algebra": "u1", "tol": 1e-6}
    with pytest.raises(ConfigError):
        RunConfig(algebra="so5").validate()
    with pytest.raises(ConfigError):
        RunConfig(samples=0).validate()


def test_nonfinite_values_are_strings():
    rep = make_report("flow", RunConfig(), [], {"status": "x", "iterations": 0, "final_energy": float("inf")})
    assert rep["data"]["final_energy"] == "inf"
    json.dumps(rep, allow_nan=False)


def test_flow_writes_artifacts(capsys, tmp_path):
    cfg = tmp_path / "flow.toml"
    cfg.write_text(f'max_iter = 1\nout = "{tmp_path / "run"}"\n')
    code, out, _ = _run(capsys, "flow", "--config", str(cfg))
    assert code == EXIT_FAIL and "status max_iter" in out
    run = tmp_path / "run"
    for name in ("energy.csv", "connection.json", "predicates.json", "state.json", "report.json"):
        assert (run / name).exists()
    rep = json.loads((run / "report.json").read_text())
    jsonschema.validate(rep, load_schema())
    assert rep["data"]["iterations"] == 1


def test_cohomology_command(capsys):
    code, out, _ = _run(capsys, "cohomology", "--n", "3", "--json")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert [rep["data"]["h0_B"], rep["data"]["h1_B"]] == [3, 18]


def test_cohomology_size_cap(capsys):
    code, _, err = _run(capsys, "cohomology", "--n", "8", "--method", "dense")
    assert code == EXIT_USAGE and "size cap" in err
