"""CSV / JSON writers and the per-command run manifest.

Floats are written with ``repr`` so every table round-trips bit-exactly and
identical runs give identical checksums.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_hash, result_dict

MANIFEST_NAME = "manifest.json"
CONFIG_NAME = "config.json"


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def write_json(path: Path, doc) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def command_dir(out_root: str | Path, command: str, cfg: RunConfig) -> Path:
    """``<out>/<command>-<hash12>``; distinct configs never share a directory."""
    path = Path(out_root) / f"{command}-{config_hash(cfg)[:12]}"
    path.mkdir(parents=True, exist_ok=True)
    return path


@dataclass(frozen=True, slots=True)
class RunManifest:
    command: str
    config_hash: str
    code_version: str
    outputs: dict[str, str]              # file name -> SHA-256
    wall_clock_s: float
    seeds: dict[str, int] = field(default_factory=dict)


def finish_run(
    directory: Path,
    command: str,
    cfg: RunConfig,
    outputs: list[Path],
    wall_clock_s: float,
    seeds: dict[str, int],
) -> RunManifest:
    """Write config.json and manifest.json next to *outputs*."""
    config_path = write_json(directory / CONFIG_NAME, result_dict(cfg))
    checksums = {p.name: sha256_file(p) for p in sorted([*outputs, config_path])}
    manifest = RunManifest(command, config_hash(cfg), __version__, checksums, wall_clock_s, seeds)
    write_json(directory / MANIFEST_NAME, asdict(manifest))
    return manifest
