import sys

from ew_psds.cli import main

if __name__ == "__main__":
    sys.exit(main())
