import sys

from near_perfect.cli import main

if __name__ == "__main__":
    sys.argv[0] = "near-perfect"
    sys.exit(main())
