import sys

from byzsense.cli import main

sys.exit(main())
