import sys

from tabsynth.main import main

sys.exit(main())
