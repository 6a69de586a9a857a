import sys

from cellhom.cli import main

sys.exit(main())
