#!/usr/bin/env python3
"""Main entry point for the racing command-line tools."""

import logging
import sys
from pathlib import Path
from typing import Optional

# Add the project root to the Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from racing.cli import run
from racing.config import RacingSettings


def setup_logging(settings: RacingSettings) -> None:
    """Setup logging configuration."""
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
    )


def main(argv: Optional[list[str]] = None) -> None:
    """Configure logging from RACING_* settings and dispatch the command."""
    settings = RacingSettings()
    setup_logging(settings)
    sys.exit(run(argv, settings))


if __name__ == "__main__":
    main()
