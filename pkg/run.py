#!/usr/bin/env python3
"""
Torus Cover
Run script for the command line
"""

import logging
import sys

from config import active_config
from cli import dispatch


def configure_logging():
    """Log to stderr, and to LOG_FILE when one is configured"""
    settings = active_config()
    logging.basicConfig(
        level=getattr(logging, str(settings.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    if settings.LOG_FILE:
        handler = logging.FileHandler(settings.LOG_FILE, encoding='utf-8')
        handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
        logging.getLogger().addHandler(handler)


def main():
    """Main function to run one subcommand"""
    configure_logging()
    try:
        status = dispatch(sys.argv[1:])
    except KeyboardInterrupt:
        print("\n👋 Interrupted", file=sys.stderr)
        status = 1
    sys.exit(status)


if __name__ == '__main__':
    main()
