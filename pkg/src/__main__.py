"""Allow ``python -m src`` execution."""

import sys

from .cli import main

sys.exit(main())
