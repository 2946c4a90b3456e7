from .commands import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, build_parser, run

__all__ = ["EXIT_DATA", "EXIT_NUMERICAL", "EXIT_OK", "EXIT_USAGE", "build_parser", "run"]
