import sys

from hcreid.cli import main

sys.exit(main())
