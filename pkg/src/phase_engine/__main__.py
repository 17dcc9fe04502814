"""Allow running the engine as module: python -m phase_engine"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
