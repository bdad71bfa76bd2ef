import sys

from graphrep.cli import main

sys.exit(main())
