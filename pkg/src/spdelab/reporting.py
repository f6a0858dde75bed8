"""Deterministic report emission: 17-significant-digit JSON and CSV.

Output files are a diffable contract: floats carry 17 significant digits
(lossless for 64-bit values), keys are sorted, separators and line endings
are fixed (LF), and every file embeds the tool version, master seed, and a
hash of the full run configuration.  Non-finite floats are written as the
strings "nan", "inf", "-inf" (strict JSON has no literals for them).
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["fmt_float", "dumps_json", "config_hash", "write_json", "write_ensemble_csv"]


def fmt_float(x: float) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _emit(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt_float(obj)
        return f'"{s}"' if s in ("nan", "inf", "-inf") else s
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{out}"'
    if isinstance(obj, np.ndarray):
        return _emit(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ",".join(f"{_emit(str(k))}:{_emit(v)}" for k, v in items) + "}"
    raise TypeError(f"cannot serialize {type(obj)}")


def dumps_json(obj) -> str:
    return _emit(obj) + "\n"


def config_hash(payload: dict) -> str:
    return hashlib.sha256(dumps_json(payload).encode()).hexdigest()


def write_json(path: Path, payload: dict, seed: int, cfg_hash: str) -> None:
    body = {"version": __version__, "seed": seed, "config_hash": cfg_hash, **payload}
    Path(path).write_text(dumps_json(body), newline="\n")


def write_ensemble_csv(path: Path, ensemble, seed: int, cfg_hash: str) -> None:
    """Time series as rows (t, name, mean, se, blowup_fraction, n_alive)."""
    lines = [
        f"# version={__version__} seed={seed} config_hash={cfg_hash}",
        "t,name,mean,se,blowup_fraction,n_alive",
    ]
    for j, t in enumerate(ensemble.times):
        for name in ensemble.functional_names():
            lines.append(
                ",".join((
                    fmt_float(t),
                    name,
                    fmt_float(ensemble.mean[name][j]),
                    fmt_float(ensemble.se[name][j]),
                    fmt_float(ensemble.blowup_fraction[j]),
                    str(int(ensemble.n_alive[j])),
                ))
            )
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_field_csv(path: Path, grid, values: np.ndarray, seed: int, cfg_hash: str,
                    name: str = "phi") -> None:
    """Node coordinates and one field column."""
    lines = [
        f"# version={__version__} seed={seed} config_hash={cfg_hash}",
        f"x,{name}",
    ]
    pts = grid.points
    for k in range(grid.n_nodes):
        coord = pts[k]
        coord_s = (
            fmt_float(coord) if np.ndim(coord) == 0
            else ";".join(fmt_float(c) for c in coord)
        )
        lines.append(f"{coord_s},{fmt_float(values[k])}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")
