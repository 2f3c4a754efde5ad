"""Monte Carlo state evolution for the multisource AMP decoder.

Tracks the effective-noise covariance C(t) of the decoupled per-row model
r = x + phi, phi ~ CN(0, C(t)), via

    C(t+1) = sigma_w^2 I + sum_u alpha_u E[(eta_ut(x+phi) - x)^H (eta_ut(x+phi) - x)]

with C(1) the thermal-plus-full-interference covariance of the first pass.
Expectations are estimated with the activity strata sampled separately
(exact reweighting by lambda), otherwise rare-activity locations would
dominate the Monte Carlo error.

By default the signal rows x are drawn from the continuous position law
(what the simulator transmits), while the denoiser uses its grid-based
model; this is what makes the prediction valid for the mismatched decoder
as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .airlink import channel_profiles, sample_location_channels
from .denoiser import DenoiserWorkspace, denoise_rows, prepare
from .geometry import build_position_grid
from .rng import complex_normal, correlated_rows
from .scenario import LocationPrior


@dataclass(frozen=True)
class SeTrace:
    covariances: list        # C(t), t = 1..T (entry t-1)
    predicted_mse: list      # normalized MSE of X(t), t = 1..T
    samples: int
    truth: str               # continuous | grid
    mixture: str

    @property
    def iterations(self) -> int:
        return len(self.covariances)

    def cov(self, t: int) -> np.ndarray:
        """C(t), 1-indexed like the recursion."""
        return self.covariances[t - 1]


def initial_covariance(priors: list[LocationPrior], alphas, sigma_w2: float) -> np.ndarray:
    """First-pass effective noise: thermal plus every location's full load,
    with the position expectation taken over the decoder's grid."""
    f = priors[0].profiles.shape[1]
    diag = np.zeros(f)
    for prior, alpha in zip(priors, alphas):
        diag += alpha * prior.lam * (prior.grid.weights @ prior.profiles)
    return (sigma_w2 * np.eye(f) + np.diag(diag)).astype(complex)


def _mean_profile_continuous(prior: LocationPrior, quad_order: int) -> np.ndarray:
    """Position-averaged covariance profile over the continuous support,
    via a dense sub-triangle quadrature."""
    g = prior.geometry
    if prior.tile is not None:
        pts = build_position_grid(prior.tile, quad_order, g.torus).points
    else:
        pts = np.concatenate(
            [build_position_grid(t, quad_order, g.torus).points for t in g.tiles]
        )
    return channel_profiles(g, pts).mean(axis=0)


def initial_covariance_continuous(
    priors: list[LocationPrior], alphas, sigma_w2: float, quad_order: int = 24
) -> np.ndarray:
    f = priors[0].geometry.n_antennas
    diag = np.zeros(f)
    for prior, alpha in zip(priors, alphas):
        diag += alpha * prior.lam * _mean_profile_continuous(prior, quad_order)
    return (sigma_w2 * np.eye(f) + np.diag(diag)).astype(complex)


def _draw_active_rows(prior: LocationPrior, samples: int, rng, truth: str):
    if truth == "continuous":
        _, h = sample_location_channels(prior, samples, rng)
        return h
    qi = rng.choice(len(prior.grid), size=samples, p=prior.grid.weights)
    return complex_normal(rng, (samples, prior.profiles.shape[1]), var=prior.profiles[qi])


def se_step(
    c_mat: np.ndarray,
    priors: list[LocationPrior],
    alphas,
    sigma_w2: float,
    samples: int,
    rng: np.random.Generator,
    truth: str = "continuous",
    mixture: str = "posterior",
    eta_fn=None,
):
    """One SE iteration: returns (C(t+1), per-location error covariances).

    eta_fn(ws, rows, x_true) overrides the denoiser (testing hook); the
    default is the Bayesian posterior mean.
    """
    f = c_mat.shape[0]
    chol = np.linalg.cholesky(c_mat)
    if eta_fn is None:
        eta_fn = lambda ws, rows, x: denoise_rows(ws, rows).eta
    e_mats = []
    for prior in priors:
        ws = prepare(prior, c_mat, mixture=mixture)
        h = _draw_active_rows(prior, samples, rng, truth)
        err_act = eta_fn(ws, h + correlated_rows(rng, samples, chol), h) - h
        e_act = err_act.conj().T @ err_act / samples
        phi = correlated_rows(rng, samples, chol)
        eta_idle = eta_fn(ws, phi, np.zeros_like(phi))
        e_idle = eta_idle.conj().T @ eta_idle / samples
        e_mats.append(prior.lam * e_act + (1.0 - prior.lam) * e_idle)
    c_next = sigma_w2 * np.eye(f, dtype=complex)
    for alpha, e in zip(alphas, e_mats):
        c_next = c_next + alpha * e
    c_next = 0.5 * (c_next + c_next.conj().T)
    return c_next, e_mats


def run_se(
    priors: list[LocationPrior],
    alphas,
    sigma_w2: float,
    iterations: int,
    samples: int,
    rng: np.random.Generator,
    truth: str = "continuous",
    mixture: str = "posterior",
    quad_order: int = 24,
) -> SeTrace:
    """State-evolution trace C(1..T) and the predicted normalized MSE of X(t).

    X(1) = 0 gives MSE 1 by normalization; later entries are the
    interference trace of C(t) over the signal power.
    """
    if iterations < 1:
        raise ValueError("need at least one iteration")
    if truth == "continuous":
        c1 = initial_covariance_continuous(priors, alphas, sigma_w2, quad_order)
    else:
        c1 = initial_covariance(priors, alphas, sigma_w2)
    f = c1.shape[0]
    denom = float(np.trace(c1).real - f * sigma_w2)
    covs = [c1]
    mses = [1.0]
    for _ in range(iterations - 1):
        c_next, e_mats = se_step(
            covs[-1], priors, alphas, sigma_w2, samples, rng, truth=truth, mixture=mixture
        )
        covs.append(c_next)
        mses.append(
            float(sum(a * np.trace(e).real for a, e in zip(alphas, e_mats))) / denom
        )
    return SeTrace(
        covariances=covs, predicted_mse=mses, samples=samples, truth=truth, mixture=mixture
    )


def channel_error_active(
    priors: list[LocationPrior],
    c_mat: np.ndarray,
    samples: int,
    rng: np.random.Generator,
    truth: str = "continuous",
    mixture: str = "posterior",
) -> np.ndarray:
    """Predicted per-component channel MSE of the denoiser output for an
    active message, per location.  This is the asymptotic counterpart of the
    detected-set channel error of the finite decoder."""
    f = c_mat.shape[0]
    chol = np.linalg.cholesky(c_mat)
    out = np.empty(len(priors))
    for u, prior in enumerate(priors):
        ws = prepare(prior, c_mat, mixture=mixture)
        h = _draw_active_rows(prior, samples, rng, truth)
        err = denoise_rows(ws, h + correlated_rows(rng, samples, chol)).eta - h
        out[u] = np.mean(np.abs(err) ** 2)
    return out
