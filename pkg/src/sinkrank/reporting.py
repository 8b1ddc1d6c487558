"""Run manifests and delimited/JSON output."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import __version__


@dataclass(frozen=True)
class RunManifest:
    command: str
    input_digest: str
    flags: dict
    seed: int | None
    version: str = __version__
    timestamp: str = field(default_factory=lambda: _timestamp())

    def to_dict(self) -> dict:
        return asdict(self)


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the stamp for reproducible artifacts.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def _plain(obj):
    """Make numpy values JSON serialisable."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def render_json(payload: dict, manifest: RunManifest) -> str:
    body = {"manifest": manifest.to_dict()}
    body.update(_plain(payload))
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def render_csv(header: Sequence[str], rows: Iterable[Sequence], manifest: RunManifest) -> str:
    """CSV with the manifest as a leading ``# manifest`` comment line."""
    buf = io.StringIO()
    buf.write("# manifest " + json.dumps(manifest.to_dict(), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v)
                         for v in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[dict, list[dict]]:
    """Parse output of :func:`render_csv` back into manifest and rows."""
    lines = text.splitlines()
    manifest = {}
    if lines and lines[0].startswith("# manifest "):
        manifest = json.loads(lines[0][len("# manifest "):])
        lines = lines[1:]
    return manifest, list(csv.DictReader(lines))
