"""
Shared helpers for subcommands
"""
import json
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from nplcm.models.manifest import MANIFEST_FILE, ManifestRegistry, RunManifest


def arguments(args) -> Dict[str, Any]:
    """Parsed flags as a JSON-serializable dict"""
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ('handler', 'command'):
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def emit(payload: Dict[str, Any], stream=None) -> None:
    """Print a JSON envelope on stdout"""
    stream = stream or sys.stdout
    stream.write(json.dumps(payload, indent=2, default=str) + "\n")


def save_manifest(out_dir: Path, command: str, args, seeds: Optional[Dict[str, Any]] = None,
                  config: Optional[Dict[str, Any]] = None,
                  inputs: Optional[Dict[str, Path]] = None,
                  filename: str = MANIFEST_FILE) -> Path:
    manifest = RunManifest(command=command, arguments=arguments(args),
                           seeds=dict(seeds or {}), config=dict(config or {}))
    for label, path in (inputs or {}).items():
        if path is not None:
            manifest.add_input(label, path)
    return ManifestRegistry(out_dir, filename=filename).save(manifest)
