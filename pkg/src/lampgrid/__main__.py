import sys

from lampgrid.cli import main

if __name__ == "__main__":
    sys.exit(main())
