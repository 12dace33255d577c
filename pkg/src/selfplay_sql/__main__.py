"""``python -m selfplay_sql``."""

import sys

from .cli import main

sys.exit(main())
