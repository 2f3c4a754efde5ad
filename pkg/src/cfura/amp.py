"""Multisource AMP recursion with Onsager correction.

Per iteration t (Z(0) = 0, X_u(1) = 0):

    Gamma_u = S_u X_u(t) - alpha_u Z(t-1) Q_u(t)
    Z(t)    = Y - sum_u Gamma_u
    R_u(t)  = S_u^H Z(t) + X_u(t)
    X_u(t+1) = eta_ut(R_u(t))

Q_u(t+1) approximates E[eta'_ut(x + phi(t))]: either the self-averaging
row mean of the analytic Jacobian (empirical mode, default) or a Monte
Carlo expectation under the prior and the SE covariance (se mode).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .airlink import Codebook, GroundTruth
from .denoiser import (
    DenoiserWorkspace,
    NumericalError,
    denoise_rows,
    prepare,
)
from .rng import correlated_rows
from .scenario import LocationPrior
from .state_evolution import SeTrace, _draw_active_rows

log = logging.getLogger(__name__)


@dataclass
class AmpTrace:
    """Per-iteration diagnostics plus the decoder outputs after T iterations."""

    mse: list                 # normalized MSE of X(t), t = 1..T+1 (empty without truth)
    covariances: list         # C(t) handed to the denoiser, t = 1..T
    r_final: list             # R_u(T) per location
    x_hat: list               # X_u(T+1) = eta_uT(R_u(T)) per location
    iterations: int
    onsager_mode: str
    c_source: str

    @property
    def c_final(self) -> np.ndarray:
        return self.covariances[-1]


def normalized_mse(estimates: list, truth_channels: list):
    """Ratio-of-sums normalized error across locations; None if truth is all zero."""
    num = sum(float(np.sum(np.abs(xh - x) ** 2)) for xh, x in zip(estimates, truth_channels))
    den = sum(float(np.sum(np.abs(x) ** 2)) for x in truth_channels)
    if den == 0.0:
        return None
    return num / den


def empirical_covariance(residuals: list) -> np.ndarray:
    """Pooled covariance of the decoupled-noise rows, all locations, row-weighted."""
    n = sum(len(r) for r in residuals)
    f = residuals[0].shape[1]
    c = np.zeros((f, f), dtype=complex)
    for r in residuals:
        c += r.conj().T @ r
    c /= n
    return 0.5 * (c + c.conj().T)


def covariance_source(mode: str, se_trace: SeTrace | None = None):
    """Provider of the per-iteration effective covariance C(t).

    se mode passes the SE matrices through; empirical mode estimates C(t)
    from the pooled rows of R_u(t) - X_u(t).
    """
    if mode == "se":
        if se_trace is None:
            raise ValueError("se covariance source requires an SE trace")
        return lambda t, residuals: se_trace.cov(t)
    if mode == "empirical":
        return lambda t, residuals: empirical_covariance(residuals)
    raise ValueError(f"unknown covariance source {mode!r}")


def onsager_matrix(
    mode: str,
    ws: DenoiserWorkspace,
    rows: np.ndarray | None = None,
    prior: LocationPrior | None = None,
    c_mat: np.ndarray | None = None,
    samples: int = 20000,
    rng: np.random.Generator | None = None,
    truth: str = "continuous",
) -> np.ndarray:
    """Q_u(t+1) = E[eta'(x + phi)] under the chosen estimator.

    empirical: mean analytic Jacobian over the decoder's own rows.
    se: Monte Carlo over x ~ prior and phi ~ CN(0, C(t)).
    """
    if mode == "empirical":
        if rows is None:
            raise ValueError("empirical Onsager needs the iteration's rows")
        return denoise_rows(ws, rows, want_jacobian=True).mean_jacobian
    if mode == "se":
        if prior is None or c_mat is None or rng is None:
            raise ValueError("se Onsager needs (prior, c_mat, rng)")
        if prior.lam == 0.0:
            return np.zeros((c_mat.shape[0],) * 2, dtype=complex)
        chol = np.linalg.cholesky(c_mat)
        h = _draw_active_rows(prior, samples, rng, truth)
        jac_act = denoise_rows(ws, h + correlated_rows(rng, samples, chol), want_jacobian=True).mean_jacobian
        phi = correlated_rows(rng, samples, chol)
        jac_idle = denoise_rows(ws, phi, want_jacobian=True).mean_jacobian
        return prior.lam * jac_act + (1.0 - prior.lam) * jac_idle
    raise ValueError(f"unknown onsager mode {mode!r}")


def run_amp(
    y: np.ndarray,
    codebooks: list[Codebook],
    priors: list[LocationPrior],
    sigma_w2: float,
    iterations: int,
    onsager_mode: str = "empirical",
    c_source: str = "se",
    se_trace: SeTrace | None = None,
    truth: GroundTruth | None = None,
    mixture: str = "posterior",
    rng: np.random.Generator | None = None,
    onsager_samples: int = 20000,
    check_residual: bool = True,
    early_stop_tol: float | None = None,
) -> AmpTrace:
    """Run T iterations of the multisource AMP decoder on one slot."""
    if iterations < 1:
        raise ValueError("need at least one iteration")
    block_length, f = y.shape
    mats = [cb.entries for cb in codebooks]
    alphas = [cb.n_codewords / block_length for cb in codebooks]
    n_loc = len(priors)
    if len(mats) != n_loc:
        raise ValueError("one codebook per location required")

    provider = covariance_source(c_source, se_trace)
    x_cur = [np.zeros((cb.n_codewords, f), dtype=complex) for cb in codebooks]
    z_prev = np.zeros_like(y)
    q_mats = [np.zeros((f, f), dtype=complex) for _ in range(n_loc)]

    mse = [] if truth is None else [normalized_mse(x_cur, truth.channels)]
    covariances = []
    r_cur = None

    for t in range(1, iterations + 1):
        gammas = [
            mats[u] @ x_cur[u] - alphas[u] * (z_prev @ q_mats[u]) for u in range(n_loc)
        ]
        z = y - sum(gammas)
        if check_residual:
            z_alt = (
                y
                - sum(mats[u] @ x_cur[u] for u in range(n_loc))
                + sum(alphas[u] * (z_prev @ q_mats[u]) for u in range(n_loc))
            )
            rel = np.linalg.norm(z - z_alt) / max(np.linalg.norm(z), 1e-300)
            if rel > 1e-8:
                raise NumericalError(f"residual identity violated at iteration {t}: {rel:.2e}")
        if not np.all(np.isfinite(z)):
            raise NumericalError(f"non-finite residual at iteration {t}")

        r_cur = [mats[u].conj().T @ z + x_cur[u] for u in range(n_loc)]
        residuals = [r_cur[u] - x_cur[u] for u in range(n_loc)]
        c_mat = provider(t, residuals)
        covariances.append(c_mat)

        x_next, q_next = [], []
        for u, prior in enumerate(priors):
            try:
                ws = prepare(prior, c_mat, mixture=mixture)
            except NumericalError as e:
                raise NumericalError(f"iteration {t}, location {u}: {e}") from e
            want_jac = onsager_mode == "empirical"
            res = denoise_rows(ws, r_cur[u], want_jacobian=want_jac)
            if not np.all(np.isfinite(res.eta)):
                raise NumericalError(f"non-finite estimate at iteration {t}, location {u}")
            x_next.append(res.eta)
            if onsager_mode == "empirical":
                q_next.append(res.mean_jacobian)
            else:
                q_next.append(
                    onsager_matrix(
                        "se", ws, prior=prior, c_mat=c_mat, samples=onsager_samples, rng=rng
                    )
                )

        if truth is not None:
            mse.append(normalized_mse(x_next, truth.channels))
            if len(mse) >= 3 and mse[-1] is not None and mse[-1] > mse[-2]:
                log.debug("normalized MSE increased at iteration %d: %.3e -> %.3e", t, mse[-2], mse[-1])

        x_cur, q_mats, z_prev = x_next, q_next, z
        if (
            early_stop_tol is not None
            and truth is not None
            and len(mse) >= 2
            and mse[-1] is not None
            and abs(mse[-2] - mse[-1]) < early_stop_tol
        ):
            break

    return AmpTrace(
        mse=mse,
        covariances=covariances,
        r_final=r_cur,
        x_hat=x_cur,
        iterations=len(covariances),
        onsager_mode=onsager_mode,
        c_source=c_source,
    )
