"""
Report writers - JSON and CSV artifacts with a reproducibility header

Every file starts with the config hash, the package version and the tool
name. Files are written to a temporary sibling and renamed into place, so a
reader never sees a partial file. No timestamps: the same config always
yields byte-identical output.
"""

from typing import Any, Dict, Optional
import json
import logging
import math
import os
import tempfile

import pandas as pd

logger = logging.getLogger(__name__)

TOOL_NAME = "rsperturb"
CSV_FLOAT_FORMAT = "%.17g"


def output_header(config_hash: str, version: str) -> Dict[str, str]:
    return {"config_hash": config_hash, "version": version, "tool": TOOL_NAME}


def _json_safe(value: Any) -> Any:
    # Non-finite floats become strings; plain json.dumps would emit NaN/Infinity.
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def atomic_write_text(path: str, text: str) -> str:
    """Write ``text`` to ``path`` via a temporary file in the same directory"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("wrote %s", path)
    return path


def write_json(path: str, header: Dict[str, str], payload: Dict[str, Any]) -> str:
    document = {"header": header}
    document.update(payload)
    text = json.dumps(_json_safe(document), indent=2, sort_keys=False, allow_nan=False)
    return atomic_write_text(path, text + "\n")


def write_csv(path: str, header: Dict[str, str], frame: pd.DataFrame) -> str:
    """``# key=value`` header lines, then the frame; read back with comment='#'"""
    lines = "".join(f"# {key}={value}\n" for key, value in header.items())
    body = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_text(path, lines + body)


def read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def lambda_tag(lam: float) -> str:
    """File-name safe rendering of a coupling, e.g. 0.5 -> '0.5', -1e-3 -> 'm0.001'"""
    text = repr(float(lam))
    return text.replace("-", "m").replace("+", "")


def sums_filename(state_index: int, lam: float, directory: Optional[str] = None) -> str:
    name = f"sums_{state_index}_{lambda_tag(lam)}.csv"
    return os.path.join(directory, name) if directory else name
