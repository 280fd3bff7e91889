import sys

from pawcap.pipeline.cli import main

if __name__ == '__main__':
    sys.exit(main())
