import sys

from piola.cli import main

sys.exit(main())
