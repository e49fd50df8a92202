"""Synthetic benchmark data with two overlapping protected attributes.

The bundled 1,000-point CSV (data/synthetic_1000.csv) is generated by
``write_synthetic_csv`` with the default seed. Four Gaussian blobs sit at
the corners of a square; the ``sex`` attribute is correlated with the
horizontal side and ``married`` with the vertical side, so vanilla k-means
recovers blob-shaped clusters that are badly unbalanced on both attributes.
Each record belongs to exactly one group per attribute (Delta = 2).
"""

from __future__ import annotations

import importlib.resources
from pathlib import Path

import numpy as np

DEFAULT_SEED = 20190917
BUNDLED_NAME = "synthetic_1000.csv"

_BLOBS = np.array([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0], [6.0, 6.0]])
_SIGMA = 1.2
_P_SEX_A = (0.85, 0.20, 0.85, 0.20)       # by blob: left column skews 'a'
_P_MARRIED = (0.80, 0.80, 0.30, 0.30)     # bottom row skews 'yes'


def synthetic_rows(n: int = 1000, seed: int = DEFAULT_SEED) -> list[tuple[float, float, str, str]]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    blob = rng.integers(0, len(_BLOBS), size=n)
    coords = _BLOBS[blob] + rng.normal(0.0, _SIGMA, size=(n, 2))
    u = rng.random((n, 2))
    rows = []
    for i in range(n):
        sex = "a" if u[i, 0] < _P_SEX_A[blob[i]] else "b"
        married = "yes" if u[i, 1] < _P_MARRIED[blob[i]] else "no"
        rows.append((float(coords[i, 0]), float(coords[i, 1]), sex, married))
    return rows


def write_synthetic_csv(path, n: int = 1000, seed: int = DEFAULT_SEED) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("x,y,sex,married\n")
        for x, y, sex, married in synthetic_rows(n, seed):
            fh.write(f"{x!r},{y!r},{sex},{married}\n")
    return path


def bundled_dataset_path() -> Path:
    """Filesystem path of the packaged 1,000-point synthetic dataset."""
    res = importlib.resources.files("faircluster").joinpath("data", BUNDLED_NAME)
    return Path(str(res))


if __name__ == "__main__":
    out = Path(__file__).parent / "data" / BUNDLED_NAME
    write_synthetic_csv(out)
    print(f"wrote {out}")
