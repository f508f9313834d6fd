"""
Main Application Entry Point
npLCM regression engine command line: simulate, fit, diagnose, summarize, replicate
"""
import argparse
import logging
import sys

from config import Config, config

from nplcm import __version__
from nplcm.commands import diagnose, fit, replicate, simulate, summarize
from nplcm.middleware.error_handler import register_error_handlers

# Configure logging
logging.basicConfig(
    level=Config.LOG_LEVEL,
    format=Config.LOG_FORMAT
)
logger = logging.getLogger(__name__)

COMMANDS = (simulate, fit, diagnose, summarize, replicate)


def create_parser() -> argparse.ArgumentParser:
    """Parser factory: one subcommand per pipeline stage"""
    parser = argparse.ArgumentParser(
        prog='nplcm',
        description='Bayesian nested partially-latent class models with covariate regression'
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--env', choices=sorted(k for k in config if k != 'default'),
                        default=None, help='Configuration profile (default: NPLCM_ENV)')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for command in COMMANDS:
        command.register(subparsers)

    # Register error handlers
    register_error_handlers(parser)
    return parser


def main(argv=None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)

    config_class = config.get(args.env or Config.NPLCM_ENV, config['default'])
    config_class.init_app()
    if not config_class.validate():
        logger.warning("Continuing with configuration warnings")

    return args.handler(args)


if __name__ == '__main__':
    sys.exit(main())
