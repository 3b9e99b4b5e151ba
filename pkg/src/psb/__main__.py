"""Allow ``python -m psb`` as an alias for the ``psb`` console script."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
