import sys

from rhosim.cli import main

sys.exit(main())
