import sys

from shapley_forest.main import main

sys.exit(main())
