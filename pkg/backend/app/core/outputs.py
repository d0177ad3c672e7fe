# CSV/JSON output helpers: every file carries the config and kernel hash it was produced with
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import pandas as pd

FLOAT_FORMAT = "%.17g"


def provenance_lines(config: Optional[Dict[str, Any]] = None, kernel_sha1: Optional[str] = None) -> str:
    lines = []
    if config is not None:
        lines.append(f"# config: {json.dumps(config, sort_keys=True, default=str)}\n")
    if kernel_sha1 is not None:
        lines.append(f"# kernel_sha1: {kernel_sha1}\n")
    return "".join(lines)


def frame_to_csv(df: pd.DataFrame, config: Optional[Dict[str, Any]] = None,
                 kernel_sha1: Optional[str] = None) -> str:
    return provenance_lines(config, kernel_sha1) + df.to_csv(index=False, float_format=FLOAT_FORMAT,
                                                             lineterminator="\n")


def write_csv(df: pd.DataFrame, path: Union[str, Path], config: Optional[Dict[str, Any]] = None,
              kernel_sha1: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(frame_to_csv(df, config, kernel_sha1))
    return path


def read_csv(path: Union[str, Path]) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """DataFrame plus the provenance header ({'config': ..., 'kernel_sha1': ...})"""
    meta: Dict[str, Any] = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = json.loads(value) if key == "config" else value
    df = pd.read_csv(path, comment="#", float_precision="round_trip")
    return df, meta


def write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str))
    return path
