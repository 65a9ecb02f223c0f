import sys

from .cli_reports import main

sys.exit(main())
