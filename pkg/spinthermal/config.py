"""Runtime settings and config-file handling."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from spinthermal.errors import ResourceLimitError, ValidationError
from spinthermal.version import __version__, parse_version

logger = logging.getLogger(__name__)

MAX_SITES_ENV = "SPINTHERMAL_MAX_L"
DEFAULT_MAX_SITES = 16
FULL_MATRIX_MAX_SITES = 12


@dataclass(frozen=True)
class Settings:
    """Size caps for exact diagonalization."""
    max_sites: int = DEFAULT_MAX_SITES
    full_matrix_max_sites: int = FULL_MATRIX_MAX_SITES

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> "Settings":
        """Read the L cap from ``SPINTHERMAL_MAX_L`` (falls back to 16)."""
        env = os.environ if environ is None else environ
        raw = env.get(MAX_SITES_ENV)
        if raw is None or raw.strip() == "":
            return cls()
        try:
            max_sites = int(raw)
        except ValueError:
            raise ValidationError(f"{MAX_SITES_ENV} must be an integer, got {raw!r}")
        if max_sites < 2:
            raise ValidationError(f"{MAX_SITES_ENV} must be >= 2, got {max_sites}")
        return cls(max_sites=max_sites, full_matrix_max_sites=min(FULL_MATRIX_MAX_SITES, max_sites))

    def check_sites(self, n_sites: int, dense: bool = False):
        """Raise ResourceLimitError when ``n_sites`` exceeds the relevant cap."""
        limit = self.full_matrix_max_sites if dense else self.max_sites
        if n_sites > limit:
            path = "full-matrix" if dense else "sector-blocked"
            raise ResourceLimitError(
                f"L = {n_sites} exceeds the {path} limit of {limit} "
                f"(set {MAX_SITES_ENV} to raise the blocked limit)"
            )


def load_config_file(path) -> Dict[str, Any]:
    """Load a JSON config file.

    A run manifest is accepted too: its ``config`` entry is returned, so re-running a
    manifest reproduces the recorded run.
    """
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"config file {path} is not valid JSON: {e}")

    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")

    if "config" in data and "tool_version" in data:
        recorded = data.get("tool_version")
        if parse_version(recorded)[:2] != parse_version(__version__)[:2]:
            logger.warning(
                "manifest was written by version %s, running %s; checksums may differ",
                recorded, __version__,
            )
        data = data["config"]
    return dict(data)


def resolve_options(defaults: Mapping[str, Any], file_options: Mapping[str, Any],
                    flags: Mapping[str, Any]) -> Dict[str, Any]:
    """Merge option layers: flags override the config file, which overrides defaults.

    Flags whose value is None were not given on the command line.
    """
    unknown = set(file_options) - set(defaults)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")

    resolved = dict(defaults)
    resolved.update(file_options)
    resolved.update({k: v for k, v in flags.items() if v is not None and k in defaults})
    return resolved
