"""
File Utilities
Helper functions for artifact files
"""
import json
import hashlib
import logging
from pathlib import Path
from typing import Any, Union

import numpy as np

from nplcm.middleware.error_handler import ArtifactError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def get_file_hash(filepath: PathLike, algorithm: str = 'sha256') -> str:
    """Calculate file hash"""
    hash_func = hashlib.new(algorithm)

    with open(filepath, 'rb') as f:
        for chunk in iter(lambda: f.read(8192), b''):
            hash_func.update(chunk)

    return hash_func.hexdigest()


def ensure_dir(path: PathLike) -> Path:
    """Create a directory (and parents) or fail with an artifact error"""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactError(f"Cannot create output directory {path}: {e}")
    return path


def _to_jsonable(obj: Any):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def write_json(path: PathLike, payload: Any) -> Path:
    """Write JSON with sorted keys so reruns are byte-identical"""
    path = Path(path)
    ensure_dir(path.parent)
    try:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2, sort_keys=True, default=_to_jsonable)
            f.write("\n")
    except OSError as e:
        raise ArtifactError(f"Cannot write {path}: {e}")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> Any:
    """Read a JSON document or raise an artifact error"""
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"Missing artifact: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactError(f"Cannot read {path}: {e}")


def write_frame(path: PathLike, frame) -> Path:
    """Write a pandas DataFrame as CSV; floats use shortest round-trip repr"""
    path = Path(path)
    ensure_dir(path.parent)
    try:
        frame.to_csv(path, index=False, lineterminator='\n')
    except OSError as e:
        raise ArtifactError(f"Cannot write {path}: {e}")
    return path
