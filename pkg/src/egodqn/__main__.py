import sys

from egodqn.harness.cli import main

sys.exit(main())
