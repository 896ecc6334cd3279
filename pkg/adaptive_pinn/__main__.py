"""Allow ``python -m adaptive_pinn``."""

import sys

from .main import main

sys.exit(main())
