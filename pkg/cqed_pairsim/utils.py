from __future__ import annotations

import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Mapping

import numpy as np

logger = logging.getLogger("cqed_pairsim")

# decimals kept when materialising decimal-step grids
GRID_DECIMALS = 12


def configure_logging(verbosity: int = 0) -> None:
    if logging.getLogger().handlers:
        return
    level = logging.INFO if verbosity <= 0 else logging.DEBUG
    # stdout may carry CSV
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(message)s",
        stream=sys.stderr,
    )


def ensure_dir(path: str | Path) -> Path:
    p = Path(path).expanduser()
    p.mkdir(parents=True, exist_ok=True)
    return p


def config_digest(mapping: Mapping[str, Any]) -> str:
    canonical = json.dumps(dict(mapping), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def uniform_grid(start: float, stop: float, step: float) -> np.ndarray:
    """start, start+step, ... up to stop inclusive; stop is appended if the steps miss it."""
    if not step > 0:
        raise ValueError(f"grid step must be > 0, got {step}")
    if stop < start:
        raise ValueError(f"grid stop {stop} is below start {start}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    grid = np.round(start + step * np.arange(count), GRID_DECIMALS)
    if stop - grid[-1] > 10.0 ** (-GRID_DECIMALS + 2):
        logger.debug("grid step %g misses stop %g; appending it after %g", step, stop, grid[-1])
        grid = np.append(grid, round(stop, GRID_DECIMALS))
    return grid
