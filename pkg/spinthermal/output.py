"""CSV tables and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Sequence

import numpy as np

from spinthermal.version import get_installed_version

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def format_value(value: Any) -> str:
    """Render one CSV cell; floats use the shortest repr that round-trips."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (list, tuple)):
        return " ".join(format_value(v) for v in value)
    if isinstance(value, dict):
        return " ".join(f"{k}={format_value(v)}" for k, v in sorted(value.items()))
    return str(value)


def write_table(path, header: Mapping[str, Any], columns: Sequence[str],
                rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV file preceded by ``# key = value`` comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="") as f:
        for key, value in header.items():
            f.write(f"# {key} = {format_value(value)}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.info("wrote %d rows to %s", count, path)
    return path


def file_checksum(path) -> str:
    """SHA-256 hex digest of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, command: str, config: Mapping[str, Any], seed,
                   files: Sequence[Path], extra: Mapping[str, Any] = None) -> Path:
    """Record tool version, resolved config, seed, time and output checksums."""
    out_dir = Path(out_dir)
    manifest: Dict[str, Any] = {
        "tool_version": get_installed_version(),
        "command": command,
        "config": dict(config),
        "seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "files": {Path(p).name: file_checksum(p) for p in files},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / MANIFEST_NAME
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path
