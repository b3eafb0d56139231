import sys

from smoothsplit.cli import main

sys.exit(main())
