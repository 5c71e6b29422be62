"""Run manifests and deterministic parallel execution of independent units."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path


def run_indexed(fn, items, workers: int = 1) -> list:
    """Map ``fn`` over ``items``, optionally across worker processes.

    Every item must be an independent unit of work (its own random streams),
    so results are identical for every worker count; output order follows
    input order.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, math.ceil(len(items) / (workers * 4)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def write_manifest(out_dir, command: str, config: dict, master_seed: int, artifacts: dict) -> Path:
    """Record everything needed to reproduce a run in ``out_dir``/manifest.json."""
    from . import __version__

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "package": "breedsim",
        "version": __version__,
        "command": command,
        "config": config,
        "master_seed": master_seed,
        "artifacts": {k: str(v) for k, v in artifacts.items()},
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "status": "running",
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    return path


def complete_manifest(path, started: float, status: str = "completed") -> None:
    """Stamp completion status and wall-clock duration onto a manifest."""
    path = Path(path)
    with open(path) as fh:
        manifest = json.load(fh)
    manifest["status"] = status
    manifest["completed_utc"] = datetime.now(timezone.utc).isoformat()
    manifest["wall_clock_seconds"] = round(time.monotonic() - started, 3)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
