from __future__ import annotations

import hashlib
import io
import json
import logging
import shutil
import time
import uuid
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import pandas as pd

from src.config import TOOLKIT_NAME, TOOLKIT_VERSION

logger = logging.getLogger(__name__)


@contextmanager
def step(name: str):
    start = time.time()
    logger.info("=== %s ===", name)
    try:
        yield
    finally:
        secs = time.time() - start
        logger.info("--- done: %s (%.1fs) ---", name, secs)


@dataclass(frozen=True)
class Provenance:
    config_hash: str
    seed: int
    version: str = f"{TOOLKIT_NAME} {TOOLKIT_VERSION}"

    def lines(self) -> List[str]:
        return [
            f"! toolkit={self.version}",
            f"! config_sha256={self.config_hash}",
            f"! seed={self.seed}",
        ]


def config_hash(document: dict) -> str:
    """Stable hash of a config document (key order does not matter)."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def render_table(df: pd.DataFrame, provenance: Optional[Provenance] = None) -> str:
    """
    CSV text: '!' provenance lines, header, rows. Comma separated, '\\n' endings.
    """
    buf = io.StringIO()
    if provenance is not None:
        for line in provenance.lines():
            buf.write(line + "\n")
    df.to_csv(buf, index=False, lineterminator="\n", float_format="%.12g")
    return buf.getvalue()


def write_table(df: pd.DataFrame, out_csv: Path, provenance: Optional[Provenance] = None) -> Path:
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    out_csv.write_text(render_table(df, provenance), encoding="utf-8", newline="\n")
    return out_csv


def write_json(payload: dict, out_json: Path) -> Path:
    out_json.parent.mkdir(parents=True, exist_ok=True)
    out_json.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out_json


def read_commented_csv(path: Path, comment: str = "!") -> Tuple[pd.DataFrame, List[str]]:
    """
    Read a CSV whose leading lines may be '!'-prefixed comments.
    Returns (table, comment lines without the prefix).
    """
    if not path.exists():
        raise FileNotFoundError(f"CSV not found: {path}")

    text = path.read_text(encoding="utf-8-sig")
    comments: List[str] = []
    body: List[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith(comment):
            comments.append(stripped[len(comment):].strip())
        elif stripped:
            body.append(line)

    if not body:
        raise ValueError(f"{path} has no header row.")

    df = pd.read_csv(io.StringIO("\n".join(body)))
    df.columns = [c.strip() for c in df.columns]
    return df, comments


@contextmanager
def staged_outputs(out_dir: Path) -> Iterator[Path]:
    """
    Yield a private staging directory inside out_dir. Files written there are
    moved into out_dir only if the block exits cleanly; otherwise the staging
    directory is removed and out_dir is left as it was.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = out_dir / f".staging-{uuid.uuid4().hex[:12]}"
    staging.mkdir()
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    for item in sorted(staging.iterdir()):
        item.replace(out_dir / item.name)
    staging.rmdir()
