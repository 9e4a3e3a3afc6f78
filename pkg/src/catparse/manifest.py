"""Run manifests: a small JSON record written next to command outputs."""
from __future__ import annotations

import json
import platform
import sys
import time
from pathlib import Path
from typing import Any

import numpy

from . import __version__


def write_manifest(
    path: str | Path,
    command: str,
    config: dict[str, Any],
    inputs: list[str],
    outputs: list[str],
    started: float,
    extra: dict[str, Any] | None = None,
) -> None:
    """Record what a run did: command, config snapshot, paths, timing.

    Timing fields vary between runs; everything else is reproducible for
    a fixed seed.
    """
    record = {
        "command": command,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "wall_time_s": round(time.time() - started, 3),
        "versions": {
            "catparse": __version__,
            "python": platform.python_version(),
            "numpy": numpy.__version__,
        },
        "argv": sys.argv[1:],
    }
    if extra:
        record["extra"] = extra
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(record, handle, ensure_ascii=False, indent=2)
        handle.write("\n")


def manifest_path_for(output: str | Path) -> Path:
    return Path(str(output) + ".manifest.json")
