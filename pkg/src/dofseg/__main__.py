import sys

from dofseg.cli import main

sys.exit(main())
