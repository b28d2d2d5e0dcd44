import sys

from sparsecount.cli import main

sys.exit(main())
