"""Grid-MAP position estimation for detected messages.

The per-point objective is the log posterior of the position hypothesis,

    log delta_u(q) - log|Sigma(q) + C| - r (Sigma(q) + C)^{-1} r^H,

maximized over the grid.  (The additive log pi^F constant is dropped; it
cannot move the argmax.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .denoiser import DenoiserWorkspace, _block_size, _quad_forms, prepare
from .geometry import Point2D, PositionGrid, nearest_grid_point
from .scenario import LocationPrior


@dataclass(frozen=True)
class PositionEstimate:
    location: int
    row: int
    grid_index: int
    q_hat: Point2D
    objective: np.ndarray          # per-grid-point log posterior (up to a constant)
    q_true: Point2D | None = None
    q_oracle: Point2D | None = None
    error_map: float | None = None
    error_oracle: float | None = None


def map_objectives(ws: DenoiserWorkspace, rows: np.ndarray) -> np.ndarray:
    """Position log-posterior per (row, grid point), shape (n, nq)."""
    rows = np.ascontiguousarray(np.atleast_2d(rows), dtype=complex)
    out = np.empty((len(rows), ws.n_grid))
    step = _block_size(ws)
    for lo in range(0, len(rows), step):
        block = rows[lo : lo + step]
        _, qf = _quad_forms(ws, block)
        out[lo : lo + len(block)] = (ws.log_weights[:, None] - ws.logdet_mix[:, None] - qf).T
    return out


def map_indices(ws: DenoiserWorkspace, rows: np.ndarray):
    """Argmax grid index per row (ties resolve to the smallest index)."""
    obj = map_objectives(ws, rows)
    return np.argmax(obj, axis=1), obj


def map_position(
    r: np.ndarray,
    prior: LocationPrior,
    c_mat: np.ndarray,
    location: int = 0,
    row: int = 0,
    q_true=None,
    ws: DenoiserWorkspace | None = None,
) -> PositionEstimate:
    """MAP position of one detected message, with the full objective vector.

    When the true position is supplied (simulation metrics), the oracle
    nearest-grid-point and both torus-metric errors are filled in.
    """
    if ws is None:
        ws = prepare(prior, c_mat)
    idx, obj = map_indices(ws, r)
    idx = int(idx[0])
    grid = prior.grid
    q_hat = Point2D(*grid.points[idx])
    est = dict(
        location=location,
        row=row,
        grid_index=idx,
        q_hat=q_hat,
        objective=obj[0],
    )
    if q_true is not None:
        oracle_idx = oracle_position(q_true, grid)
        est.update(
            q_true=Point2D(*np.asarray(q_true, dtype=float)),
            q_oracle=Point2D(*grid.points[oracle_idx]),
            error_map=float(grid.torus.distance(grid.points[idx], q_true)),
            error_oracle=float(grid.torus.distance(grid.points[oracle_idx], q_true)),
        )
    return PositionEstimate(**est)


def oracle_position(q0, grid: PositionGrid) -> int:
    """Grid index closest to the true position in the torus metric."""
    return nearest_grid_point(grid, q0)


def error_cdf(errors: np.ndarray, probs: np.ndarray | None = None):
    """Empirical CDF of position errors on a fixed quantile grid.

    Returns (probs, error quantiles); quantiles are observed sample values,
    so the drawn curve is a genuine step CDF.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("no position errors to summarize")
    if probs is None:
        probs = np.linspace(0.0, 1.0, 201)[1:]
    values = np.quantile(errors, probs, method="inverted_cdf")
    return probs, values
