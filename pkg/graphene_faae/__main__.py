import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import appdirs

from .cli import run
from .config import ENV_LOG_LEVEL


def setup_logging(level: Optional[str] = None):
    """Configure logging for the application."""
    level = (level or os.environ.get(ENV_LOG_LEVEL) or "INFO").upper()
    log_dir = Path(appdirs.user_log_dir("graphene_faae"))
    log_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stdout),
            logging.FileHandler(log_dir / 'graphene_faae.log')
        ]
    )


def main(argv: Optional[Sequence[str]] = None):
    """Main entry point for the application."""
    setup_logging()
    logger = logging.getLogger(__name__)

    try:
        sys.exit(run(argv))
    except Exception as e:
        logger.error(f"Application error: {e}", exc_info=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
