import sys

from quantcorr.cli import main

sys.exit(main())
