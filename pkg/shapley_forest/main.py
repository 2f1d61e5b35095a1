import json
import logging
import sys
from typing import List, Optional

from shapley_forest.cli import build_parser
from shapley_forest.core.exceptions import ShapleyForestError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; errors go to stderr as one JSON object and set the exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT, stream=sys.stderr, force=True)

    try:
        result = args.func(args)
    except ShapleyForestError as e:
        logger.debug("Command failed", exc_info=True)
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected error")
        print(json.dumps({"error": type(e).__name__, "detail": str(e), "context": {}}), file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
