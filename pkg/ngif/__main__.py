import sys

from ngif.app import main

sys.exit(main())
