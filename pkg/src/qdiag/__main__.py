import sys

from qdiag.cli import main

sys.exit(main())
