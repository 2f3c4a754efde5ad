"""Neyman-Pearson activity detection on the decoder's decoupled rows.

The NP score of a row never depends on the activity prior; lambda only
enters threshold calibration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .denoiser import DenoiserWorkspace, _block_size, _quad_forms, prepare
from .rng import complex_normal, correlated_rows
from .scenario import LocationPrior
from .state_evolution import _draw_active_rows


@dataclass(frozen=True)
class DetectionOutcome:
    """Declared set and its split against the truth for one location."""

    declared: np.ndarray      # bool mask over codewords
    detected: np.ndarray      # indices: active and declared (A^d)
    false_alarms: np.ndarray  # indices: inactive but declared (A^fa)
    missed: np.ndarray        # indices: active but not declared (A^md)
    n_active: int

    def __post_init__(self):
        assert len(self.detected) + len(self.missed) == self.n_active
        assert len(self.detected) + len(self.false_alarms) == int(self.declared.sum())


@dataclass(frozen=True)
class RocCurve:
    log_taus: np.ndarray
    p_fa: np.ndarray
    p_md: np.ndarray

    def __post_init__(self):
        order = np.argsort(self.log_taus)
        if not np.all(np.diff(self.p_fa[order]) <= 1e-12):
            raise ValueError("P_FA must be non-increasing in tau")
        ok = self.p_md[order][~np.isnan(self.p_md[order])]
        if not np.all(np.diff(ok) >= -1e-12):
            raise ValueError("P_MD must be non-decreasing in tau")


def np_scores(ws: DenoiserWorkspace, rows: np.ndarray) -> np.ndarray:
    """log Lambda_NP per row: mixture likelihood of active over inactive."""
    rows = np.ascontiguousarray(np.atleast_2d(rows), dtype=complex)
    out = np.empty(len(rows))
    step = _block_size(ws)
    for lo in range(0, len(rows), step):
        block = rows[lo : lo + step]
        qf0, qf = _quad_forms(ws, block)
        terms = (
            ws.log_weights[:, None]
            + ws.logdet_c
            - ws.logdet_mix[:, None]
            + (qf0[None, :] - qf)
        )
        out[lo : lo + len(block)] = logsumexp(terms, axis=0)
    return out


def np_log_ratio(r: np.ndarray, prior: LocationPrior, c_mat: np.ndarray) -> float:
    """Single-row convenience wrapper around np_scores."""
    return float(np_scores(prepare(prior, c_mat), r)[0])


def classify(scores: np.ndarray, active_mask: np.ndarray, log_tau: float) -> DetectionOutcome:
    """Declare active where the NP log score meets the threshold (ties active)."""
    declared = scores >= log_tau
    return DetectionOutcome(
        declared=declared,
        detected=np.flatnonzero(declared & active_mask),
        false_alarms=np.flatnonzero(declared & ~active_mask),
        missed=np.flatnonzero(~declared & active_mask),
        n_active=int(active_mask.sum()),
    )


def error_counts(scores_by_loc, active_by_loc, log_taus):
    """(false alarms, missed) counts per threshold, pooled over locations."""
    log_taus = np.asarray(log_taus, dtype=float)
    fa = np.zeros(len(log_taus), dtype=int)
    md = np.zeros(len(log_taus), dtype=int)
    for scores, active in zip(scores_by_loc, active_by_loc):
        s0 = np.sort(scores[~active])
        s1 = np.sort(scores[active])
        fa += len(s0) - np.searchsorted(s0, log_taus, side="left")
        md += np.searchsorted(s1, log_taus, side="left")
    return fa, md


def build_roc(scores_by_loc, active_by_loc, log_taus) -> RocCurve:
    """Count-weighted aggregate ROC: sums of numerators over sums of denominators.

    P_FA is normalized by the inactive population.  With no active messages
    anywhere, P_MD is reported as NaN.
    """
    n_active = int(sum(a.sum() for a in active_by_loc))
    n_inactive = int(sum(len(a) - a.sum() for a in active_by_loc))
    fa, md = error_counts(scores_by_loc, active_by_loc, log_taus)
    p_fa = fa / n_inactive if n_inactive else np.full(len(fa), np.nan)
    p_md = md / n_active if n_active else np.full(len(md), np.nan)
    order = np.argsort(log_taus)
    return RocCurve(
        log_taus=np.asarray(log_taus, dtype=float)[order],
        p_fa=p_fa[order],
        p_md=p_md[order],
    )


def sample_model_scores(
    prior: LocationPrior,
    c_mat: np.ndarray,
    samples: int,
    rng: np.random.Generator,
    mixture: str = "posterior",
):
    """Decoder-side draws of NP scores under the decoupled model.

    Both hypotheses are sampled directly (conditional draws), so rare
    activity costs nothing in resolution.  Channels come from the decoder's
    grid model: calibration must not peek at the continuous truth.
    """
    ws = prepare(prior, c_mat, mixture=mixture)
    chol = np.linalg.cholesky(np.asarray(c_mat, dtype=complex))
    h = _draw_active_rows(prior, samples, rng, truth="grid")
    active_scores = np_scores(ws, h + correlated_rows(rng, samples, chol))
    inactive_scores = np_scores(ws, correlated_rows(rng, samples, chol))
    return active_scores, inactive_scores


def calibrate_equal_error(
    prior: LocationPrior,
    c_mat: np.ndarray,
    samples: int,
    rng: np.random.Generator,
    tol: float = 1e-3,
    mixture: str = "posterior",
) -> float:
    """Bisect the NP threshold until the model FA and MD rates balance.

    Returns the log-domain threshold.  Undefined for degenerate activity
    priors (lambda 0 or 1).
    """
    if prior.lam in (0.0, 1.0):
        raise ValueError("equal-error calibration undefined for lambda in {0, 1}")
    s_act, s_inact = sample_model_scores(prior, c_mat, samples, rng, mixture=mixture)
    s_act = np.sort(s_act)
    s_inact = np.sort(s_inact)
    lo = min(s_act[0], s_inact[0]) - 1.0
    hi = max(s_act[-1], s_inact[-1]) + 1.0

    def gap(log_tau):
        p_fa = 1.0 - np.searchsorted(s_inact, log_tau, side="left") / samples
        p_md = np.searchsorted(s_act, log_tau, side="left") / samples
        return p_fa - p_md

    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = gap(mid)
        if abs(g) <= tol or hi - lo < 1e-9 * max(1.0, abs(mid)):
            break
        if g > 0:
            lo = mid
        else:
            hi = mid
    return float(mid)
