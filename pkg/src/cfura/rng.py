"""Seeded RNG substreams.

One master seed fans out into named, decorrelated substreams (codebook /
truth / noise / se / calibration), each optionally indexed by Monte Carlo
run.  Streams are derived with fixed spawn keys, so the generator you get
never depends on creation order.
"""

from __future__ import annotations

import numpy as np

STREAM_NAMES = ("codebook", "truth", "noise", "se", "calibration")


class RngStreams:
    def __init__(self, seed: int):
        self.seed = int(seed)

    def generator(self, stream: str, run: int | None = None) -> np.random.Generator:
        idx = STREAM_NAMES.index(stream)
        key = (idx,) if run is None else (idx, int(run))
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))

    def manifest_entry(self) -> dict:
        return {
            "seed": self.seed,
            "streams": {name: {"spawn_key": [i]} for i, name in enumerate(STREAM_NAMES)},
        }


def complex_normal(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """i.i.d. circular complex Gaussian entries, per-entry variance `var`.

    `var` broadcasts against `shape`, so a length-F profile vector yields
    rows with independent entries of those variances.
    """
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return scale * z


def correlated_rows(rng: np.random.Generator, n: int, chol_lower: np.ndarray) -> np.ndarray:
    """n rows ~ CN(0, C) where chol_lower @ chol_lower^H = C."""
    f = chol_lower.shape[0]
    return complex_normal(rng, (n, f)) @ chol_lower.conj().T
