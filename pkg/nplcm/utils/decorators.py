"""
Utility Decorators
Common decorators for commands and long-running functions
"""
import time
import logging
from functools import wraps

logger = logging.getLogger(__name__)


def timing_decorator(f):
    """Decorator to measure function execution time"""
    @wraps(f)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        result = f(*args, **kwargs)
        execution_time = time.perf_counter() - start_time

        logger.info(f"{f.__name__} executed in {execution_time:.4f} seconds")

        return result

    return wrapper


def log_command(name):
    """
    Decorator to log command invocation with its parsed arguments

    Usage:
        @log_command('fit')
        def run(args):
            ...
    """
    def decorator(f):
        @wraps(f)
        def wrapper(args, *rest, **kwargs):
            shown = {k: v for k, v in sorted(vars(args).items()) if k != 'handler'}
            logger.info(f"Command {name}: {shown}")
            return f(args, *rest, **kwargs)

        return wrapper

    return decorator
