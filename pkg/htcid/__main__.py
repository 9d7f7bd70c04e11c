"""Run the command line tool with python -m htcid."""

import sys

from .cli import main

sys.exit(main())
