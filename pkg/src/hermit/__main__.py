import sys

from hermit.cli import main

sys.exit(main())
