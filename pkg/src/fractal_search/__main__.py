import sys

from fractal_search.cli import main

sys.exit(main())
