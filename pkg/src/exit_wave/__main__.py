"""``python -m exit_wave``."""
import sys

from .cli import main

sys.exit(main())
