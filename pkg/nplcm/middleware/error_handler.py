"""
Error Handler Middleware
Centralized error handling for library code and command dispatch
"""
import argparse
import json
import logging
import sys
from functools import wraps

from nplcm.utils.response_formatter import error_response

logger = logging.getLogger(__name__)


class NplcmError(Exception):
    """Base error class; carries a process exit code and an optional payload"""
    exit_code = 1

    def __init__(self, message, exit_code=None, payload=None):
        super().__init__(message)
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        self.payload = payload

    def to_dict(self):
        return error_response(self.message, type=type(self).__name__, **dict(self.payload or ()))


class DataValidationError(NplcmError):
    """Input table or dataset violates the data model"""
    exit_code = 2


class ConfigurationError(NplcmError):
    """Invalid model, prior, chain or truth configuration"""
    exit_code = 2


class ModelError(NplcmError):
    """Likelihood or probability evaluation failed"""
    exit_code = 3


class SamplerError(NplcmError):
    """MCMC run aborted"""
    exit_code = 4


class DiagnosticsError(NplcmError):
    """Diagnostic preconditions not met"""
    exit_code = 5


class ArtifactError(NplcmError):
    """Missing, unreadable or incompatible run artifact"""
    exit_code = 6


def render_error(error: NplcmError, stream=None) -> None:
    """Write the JSON error envelope for a known error"""
    stream = stream or sys.stderr
    stream.write(json.dumps(error.to_dict()) + "\n")


def handle_command_errors(f):
    """
    Wrap a command handler so it returns an exit code instead of raising

    Known errors are logged and rendered; anything else is logged with a
    traceback and mapped to exit code 1.
    """
    @wraps(f)
    def wrapper(*args, **kwargs):
        try:
            result = f(*args, **kwargs)
            return 0 if result is None else result
        except NplcmError as error:
            logger.error(f"{type(error).__name__}: {error.message} (exit {error.exit_code})")
            render_error(error)
            return error.exit_code
        except KeyboardInterrupt:
            logger.warning("Interrupted")
            return 130
        except Exception as error:
            logger.exception("Unexpected error")
            render_error(NplcmError(f"Unexpected error: {error}"))
            return 1

    return wrapper


def register_error_handlers(parser):
    """Wrap every subcommand handler registered on the parser"""
    for action in parser._actions:
        if not isinstance(action, argparse._SubParsersAction):
            continue
        for subparser in action.choices.values():
            handler = subparser.get_default('handler')
            if handler is not None and not getattr(handler, '_error_wrapped', False):
                wrapped = handle_command_errors(handler)
                wrapped._error_wrapped = True
                subparser.set_defaults(handler=wrapped)
    return parser
