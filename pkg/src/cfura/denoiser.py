"""Row-wise Bayesian denoiser for the decoupled observation r = x + noise.

x is Bernoulli-active with a Gaussian-mixture channel over the location's
position grid; the noise is CN(0, C).  Everything runs in the log domain:
at the operating SNRs the likelihood ratios span hundreds of orders of
magnitude, so determinants come from Cholesky log-pivots and mixtures from
log-sum-exp.

Two mixture conventions are supported:
  * "posterior" (default): exact posterior mean; grid weights are
    renormalized against the inactive mass per row.
  * "prior": each grid hypothesis is shrunk by its own activity posterior
    and then averaged with the prior grid weights (ablation variant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.special import expit, logsumexp

from .scenario import LocationPrior


class NumericalError(RuntimeError):
    """Numerical failure in the decoder (CLI exit code 3)."""


@dataclass(frozen=True, eq=False)
class DenoiserWorkspace:
    """Per-(location, iteration) cache of factorizations shared by all rows."""

    lam: float
    weights: np.ndarray       # (nq,)
    log_weights: np.ndarray   # (nq,)
    profiles: np.ndarray      # (nq, F)
    chol_mix: np.ndarray      # (nq, F, F) lower Cholesky of Sigma(q) + C
    inv_chol_mix: np.ndarray  # (nq, F, F) inverses of the lower factors
    logdet_mix: np.ndarray    # (nq,)
    a_mats: np.ndarray        # (nq, F, F), (Sigma(q)+C)^{-1} Sigma(q)
    chol_c: np.ndarray        # (F, F) lower Cholesky of C
    inv_chol_c: np.ndarray    # (F, F)
    logdet_c: float
    mixture: str              # posterior | prior

    @property
    def n_grid(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.chol_c.shape[0]

    @property
    def log_prior_ratio(self) -> float:
        """log((1 - lam)/lam); +inf when never active, -inf when always active."""
        if self.lam == 0.0:
            return np.inf
        if self.lam == 1.0:
            return -np.inf
        return float(np.log1p(-self.lam) - np.log(self.lam))


def prepare(prior: LocationPrior, c_mat: np.ndarray, mixture: str = "posterior") -> DenoiserWorkspace:
    """Factor C and Sigma(q)+C for every grid point of one location."""
    if mixture not in ("posterior", "prior"):
        raise ValueError(f"unknown mixture convention {mixture!r}")
    c_mat = np.asarray(c_mat, dtype=complex)
    f = c_mat.shape[0]
    try:
        chol_c = np.linalg.cholesky(c_mat)
    except np.linalg.LinAlgError as e:
        raise NumericalError("effective covariance C is not positive definite") from e

    profiles = np.asarray(prior.profiles, dtype=float)
    mix = c_mat[None, :, :] + np.eye(f)[None] * profiles[:, None, :]
    try:
        chol_mix = np.linalg.cholesky(mix)
    except np.linalg.LinAlgError as e:
        raise NumericalError("Sigma(q) + C is not positive definite") from e

    diag_sigma = np.eye(f)[None] * profiles[:, None, :]
    a_mats = np.linalg.solve(mix, diag_sigma)

    eye = np.eye(f, dtype=complex)
    inv_chol_mix = np.linalg.solve(chol_mix, np.broadcast_to(eye, chol_mix.shape))
    with np.errstate(divide="ignore"):
        log_weights = np.log(prior.grid.weights)
    return DenoiserWorkspace(
        lam=prior.lam,
        weights=prior.grid.weights,
        log_weights=log_weights,
        profiles=profiles,
        chol_mix=chol_mix,
        inv_chol_mix=inv_chol_mix,
        logdet_mix=2.0 * np.sum(np.log(np.diagonal(chol_mix, axis1=1, axis2=2).real), axis=1),
        a_mats=a_mats,
        chol_c=chol_c,
        inv_chol_c=sla.solve_triangular(chol_c, eye, lower=True, check_finite=False),
        logdet_c=float(2.0 * np.sum(np.log(np.diag(chol_c).real))),
        mixture=mixture,
    )


def _half_solves(ws: DenoiserWorkspace, rows: np.ndarray):
    """L^{-1} r^H per grid point, batched: rows of the return are (L_q^{-1} r_n^H)^T.

    The triangular solves are applied as GEMMs against the cached inverse
    factors; the second half-solve (for the full (Sigma+C)^{-1} r^H) reuses
    this result.
    """
    x = rows.conj()  # row n is r_n^H transposed
    w0 = x @ ws.inv_chol_c.T
    wq = np.matmul(x[None, :, :], ws.inv_chol_mix.transpose(0, 2, 1))
    return w0, wq


def _quad_forms(ws: DenoiserWorkspace, rows: np.ndarray, halves=None):
    """r C^{-1} r^H and r (Sigma(q)+C)^{-1} r^H for each row."""
    w0, wq = _half_solves(ws, rows) if halves is None else halves
    qf0 = np.sum(np.abs(w0) ** 2, axis=1)
    qf = np.sum(np.abs(wq) ** 2, axis=2)
    return qf0, qf


def _t_vectors(ws: DenoiserWorkspace, rows: np.ndarray, halves=None):
    """C^{-1} r^H and (Sigma(q)+C)^{-1} r^H per row (as row-stacked arrays)."""
    w0, wq = _half_solves(ws, rows) if halves is None else halves
    t0 = w0 @ ws.inv_chol_c.conj()
    tq = np.matmul(wq, ws.inv_chol_mix.conj())
    return t0, tq


def _activity_weights(ws: DenoiserWorkspace, qf0: np.ndarray, qf: np.ndarray):
    """Mixture weights per (grid point, row), plus the piece the Jacobian needs.

    posterior mode: returns (w_act, w0) where w_act[q, n] is the posterior
    mass of (active, q) and w0[n] the inactive mass; they sum to 1 per row.
    prior mode: returns (w_act, dw) with w_act[q, n] = delta_q * s_q(r_n)
    (per-point shrinkage against the inactive hypothesis only) and
    dw[q, n] = delta_q * s_q * (1 - s_q), the logistic derivative weight.
    Callers handle lam == 0 themselves.
    """
    log_act = ws.log_weights[:, None] - ws.logdet_mix[:, None] - qf
    log_inact = -ws.logdet_c - qf0
    if ws.mixture == "posterior":
        if ws.lam == 1.0:
            log_total = logsumexp(log_act, axis=0)
            return np.exp(log_act - log_total), np.zeros_like(qf0)
        a = np.log(ws.lam) + log_act
        b = np.log1p(-ws.lam) + log_inact
        log_total = np.logaddexp(logsumexp(a, axis=0), b)
        return np.exp(a - log_total), np.exp(b - log_total)
    # prior mode: per-point MAP ratio, grid weights kept as priors
    if ws.lam == 1.0:
        return np.repeat(ws.weights[:, None], qf.shape[1], axis=1), np.zeros_like(qf)
    log_map = (
        ws.log_prior_ratio
        + ws.logdet_mix[:, None]
        - ws.logdet_c
        - (qf0[None, :] - qf)
    )
    shrink = expit(-log_map)  # 1 / (1 + Lambda_map(r|q))
    return ws.weights[:, None] * shrink, ws.weights[:, None] * shrink * expit(log_map)


def _block_size(ws: DenoiserWorkspace, budget_mb: int = 256) -> int:
    per_row = max(1, ws.n_grid) * ws.dim * 16 * 4
    return max(128, int(budget_mb * 1e6 / per_row))


@dataclass
class DenoiseResult:
    eta: np.ndarray                    # (n, F)
    mean_jacobian: np.ndarray | None   # (F, F), average of eta'(r) over rows


def denoise_rows(ws: DenoiserWorkspace, rows: np.ndarray, want_jacobian: bool = False) -> DenoiseResult:
    """Posterior-mean estimate for a batch of rows; optionally the mean Jacobian.

    Rows are processed in blocks so peak memory stays bounded for large
    codebooks and grids.
    """
    rows = np.ascontiguousarray(rows, dtype=complex)
    n = rows.shape[0]
    eta = np.empty_like(rows)
    jac_sum = np.zeros((ws.dim, ws.dim), dtype=complex) if want_jacobian else None
    if ws.lam == 0.0:
        eta[:] = 0.0
        return DenoiseResult(eta=eta, mean_jacobian=jac_sum)

    step = _block_size(ws)
    for lo in range(0, n, step):
        block = rows[lo : lo + step]
        halves = _half_solves(ws, block)
        qf0, qf = _quad_forms(ws, block, halves)
        means = np.matmul(block[None, :, :], ws.a_mats)  # (nq, n, F), BLAS per grid point
        w_act, w_inact = _activity_weights(ws, qf0, qf)
        eta[lo : lo + len(block)] = (w_act[:, :, None] * means).sum(axis=0)
        if not want_jacobian:
            continue
        t0, tq = _t_vectors(ws, block, halves)
        jac_sum += np.tensordot(w_act.sum(axis=1), ws.a_mats, axes=1)
        if ws.mixture == "posterior":
            tbar = (w_act[:, :, None] * tq).sum(axis=0) + w_inact[:, None] * t0
            for q in range(ws.n_grid):
                jac_sum += (w_act[q, :, None] * (tbar - tq[q])).T @ means[q]
        else:
            for q in range(ws.n_grid):
                jac_sum += (w_inact[q, :, None] * (t0 - tq[q])).T @ means[q]

    if not np.all(np.isfinite(eta)):
        raise NumericalError("denoiser produced non-finite estimates")
    mean_jac = jac_sum / n if want_jacobian else None
    return DenoiseResult(eta=eta, mean_jacobian=mean_jac)


def posterior_mean(ws: DenoiserWorkspace, r: np.ndarray) -> np.ndarray:
    """eta(r) for a single row."""
    return denoise_rows(ws, np.atleast_2d(r)).eta[0]


def conditional_mean(ws: DenoiserWorkspace, r: np.ndarray, q: int) -> np.ndarray:
    """E[h | r, active, position q] = r (Sigma(q)+C)^{-1} Sigma(q)."""
    return np.atleast_2d(r)[0] @ ws.a_mats[q]


def map_log_ratio(ws: DenoiserWorkspace, r: np.ndarray, q: int) -> float:
    """log of the inactive/active MAP ratio at known position q."""
    if ws.lam == 0.0:
        return np.inf
    if ws.lam == 1.0:
        return -np.inf
    qf0, qf = _quad_forms(ws, np.atleast_2d(r))
    return float(
        ws.log_prior_ratio + ws.logdet_mix[q] - ws.logdet_c - (qf0[0] - qf[q, 0])
    )


def jacobian_rows(ws: DenoiserWorkspace, rows: np.ndarray) -> np.ndarray:
    """Per-row Jacobians eta'(r), entry (i, j) = d eta_j / d r_i (Wirtinger,
    non-conjugate).  Meant for verification on small batches; the decoder
    itself only ever needs the row average."""
    rows = np.atleast_2d(np.asarray(rows, dtype=complex))
    n, f = rows.shape
    if ws.lam == 0.0:
        return np.zeros((n, f, f), dtype=complex)
    halves = _half_solves(ws, rows)
    qf0, qf = _quad_forms(ws, rows, halves)
    means = np.matmul(rows[None, :, :], ws.a_mats)
    w_act, w_inact = _activity_weights(ws, qf0, qf)
    t0, tq = _t_vectors(ws, rows, halves)
    jac = np.einsum("qn,qfg->nfg", w_act, ws.a_mats)
    if ws.mixture == "posterior":
        tbar = (w_act[:, :, None] * tq).sum(axis=0) + w_inact[:, None] * t0
        jac += np.einsum("qn,qni,qnj->nij", w_act, tbar[None] - tq, means)
    else:
        jac += np.einsum("qn,qni,qnj->nij", w_inact, t0[None] - tq, means)
    return jac


def jacobian(ws: DenoiserWorkspace, r: np.ndarray) -> np.ndarray:
    """eta'(r) for a single row."""
    return jacobian_rows(ws, r)[0]
