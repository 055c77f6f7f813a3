"""Module entry point: python -m albdg <command> ..."""
import sys

from .cli import main

sys.exit(main())
