import sys

from varcalc.cli import main

sys.exit(main())
