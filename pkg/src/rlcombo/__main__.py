import sys

from rlcombo.cli import main

sys.exit(main())
