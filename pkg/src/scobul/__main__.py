import sys

from scobul.cli import main

sys.exit(main())
