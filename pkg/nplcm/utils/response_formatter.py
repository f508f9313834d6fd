"""
Response Formatter
Standardized JSON envelopes for command outputs and reports
"""
from typing import Any, Dict, Optional
from datetime import datetime, timezone

from nplcm import SCHEMA_VERSION, __version__


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def success_response(data: Any = None, message: Optional[str] = None,
                     timestamp: bool = True, **kwargs) -> Dict[str, Any]:
    """
    Format a successful report envelope

    Args:
        data: Report payload
        message: Optional message
        timestamp: Include a creation timestamp; disable for byte-stable outputs
        **kwargs: Additional fields to include

    Returns:
        JSON-serializable dictionary
    """
    response = {
        'status': 'success',
        'schema_version': SCHEMA_VERSION,
        'version': __version__,
    }
    if timestamp:
        response['timestamp'] = _timestamp()

    if message:
        response['message'] = message

    if data is not None:
        response['data'] = data

    response.update(kwargs)
    return response


def error_response(error: str, message: Optional[str] = None, **kwargs) -> Dict[str, Any]:
    """
    Format an error envelope

    Args:
        error: Error type or description
        message: Optional detailed error message
        **kwargs: Additional fields to include
    """
    response = {
        'status': 'error',
        'error': error,
        'timestamp': _timestamp(),
    }

    if message:
        response['message'] = message

    response.update(kwargs)
    return response
