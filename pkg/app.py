#!/usr/bin/env python3
import logging
import os
import sys
from typing import List, Optional

from cli.commands import build_parser, run
from config.loader import RunContext

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
LOG_FILE = "run.log"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None):
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


logger = logging.getLogger(__name__)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    # Once the output directory is known, the log is mirrored into <output_dir>/run.log
    def attach_run_log(context: RunContext) -> None:
        setup_logging(args.log_level, context.output_path(LOG_FILE))
        logger.debug(f"Logging to {context.output_path(LOG_FILE)}")

    return run(args, on_context=attach_run_log)


if __name__ == "__main__":
    sys.exit(main())
