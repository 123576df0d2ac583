"""Run manifests: every CLI invocation that writes files drops a JSON
record next to them so the run can be reproduced byte-identically
(timestamp aside)."""

from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

__all__ = ["write_manifest", "load_manifest"]


def write_manifest(
    out_path: Path,
    command: str,
    config: dict,
    seed_schedule: list[int] | None = None,
) -> Path:
    payload = {
        "tool": "diamondrelay",
        "version": __version__,
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "seed_schedule": seed_schedule or [],
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path: Path) -> dict:
    return json.loads(Path(path).read_text())
