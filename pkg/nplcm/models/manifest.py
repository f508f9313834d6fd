"""
Run Manifests
Provenance records for every output directory
"""
import logging
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Union

from nplcm import SCHEMA_VERSION, __version__
from nplcm.middleware.error_handler import ArtifactError
from nplcm.utils.file_utils import get_file_hash, read_json, write_json

logger = logging.getLogger(__name__)

MANIFEST_FILE = 'manifest.json'
PathLike = Union[str, Path]


@dataclass
class RunManifest:
    """Provenance of one command invocation"""
    command: str
    arguments: Dict[str, Any]
    seeds: Dict[str, Any] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)
    input_hashes: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    package_version: str = __version__
    schema_version: str = SCHEMA_VERSION
    python_version: str = field(default_factory=platform.python_version)
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def add_input(self, label: str, path: PathLike) -> None:
        """Record the sha256 of an input file"""
        self.input_hashes[label] = get_file_hash(path)


class ManifestRegistry:
    """
    Reads and writes manifests of run directories

    A manifest is written last, so its presence marks a complete output
    directory.
    """

    def __init__(self, root: PathLike, filename: str = MANIFEST_FILE):
        """
        Args:
            root: Run output directory
            filename: Manifest name; follow-up commands writing into a fit
                directory use their own
        """
        self.root = Path(root)
        self.path = self.root / filename

    def save(self, manifest: RunManifest) -> Path:
        manifest.outputs = sorted(
            str(p.relative_to(self.root)) for p in self.root.rglob('*')
            if p.is_file() and not p.name.startswith('manifest') and p.suffix not in ('.ckpt', '.tmp')
        )
        write_json(self.path, asdict(manifest))
        logger.info(f"Manifest written: {self.path} ({len(manifest.outputs)} outputs)")
        return self.path

    def load(self) -> RunManifest:
        data = read_json(self.path)
        version = str(data.get('schema_version', ''))
        if version.split('.')[0] != SCHEMA_VERSION.split('.')[0]:
            raise ArtifactError(
                f"{self.path}: schema_version {version or 'missing'} is incompatible with {SCHEMA_VERSION}"
            )
        try:
            return RunManifest(**data)
        except TypeError as e:
            raise ArtifactError(f"Malformed manifest {self.path}: {e}")

    def exists(self) -> bool:
        return self.path.exists()

    def verify_inputs(self, paths: Dict[str, PathLike]) -> Dict[str, bool]:
        """Compare current file hashes against the recorded ones"""
        recorded = self.load().input_hashes
        return {label: recorded.get(label) == get_file_hash(path) for label, path in paths.items()}

    def compare(self, other: 'ManifestRegistry') -> Dict[str, Any]:
        """Differences in arguments, seeds and input hashes between two runs"""
        a, b = self.load(), other.load()
        diff = {}
        for name in ('arguments', 'seeds', 'input_hashes'):
            left, right = getattr(a, name), getattr(b, name)
            keys = sorted(set(left) | set(right))
            changed = {k: {'left': left.get(k), 'right': right.get(k)}
                       for k in keys if left.get(k) != right.get(k)}
            if changed:
                diff[name] = changed
        return diff
