"""Genie-aided linear MMSE channel estimation baseline.

The genie knows the active set and every active transmitter's position.
Conditioned on that knowledge the received block is jointly Gaussian with
each channel vector, so the per-RU linear MMSE estimator is optimal.  One
L x L factorization per RU serves every message and antenna of that RU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .airlink import Codebook, GroundTruth, channel_profiles
from .geometry import NetworkGeometry


@dataclass(frozen=True, eq=False)
class GenieContext:
    chol: list                 # per-RU lower Cholesky of Sigma_b (L x L)
    solved: list               # per-RU Sigma_b^{-1} S_A, (L, K)
    s_active: np.ndarray       # (L, K) active codewords, pooled
    gains: np.ndarray          # (K, B) pathloss of each active message to each RU
    index: dict                # (location, row) -> pooled column k
    m_antennas: int
    sigma_w2: float

    @property
    def n_active(self) -> int:
        return self.s_active.shape[1]


def build_context(
    codebooks: list[Codebook],
    truth: GroundTruth,
    geometry: NetworkGeometry,
    sigma_w2: float,
) -> GenieContext:
    """Assemble and factor Sigma_b = sum_active gamma_b s s^H + sigma_w^2 I per RU."""
    block_length = codebooks[0].block_length
    cols, owners, positions = [], [], []
    for u, (cb, idx) in enumerate(zip(codebooks, truth.indices)):
        for j, n in enumerate(idx):
            cols.append(cb.entries[:, n])
            owners.append((u, int(n)))
            positions.append(truth.positions[u][j])
    if cols:
        s_active = np.column_stack(cols)
        gains = channel_profiles(geometry, np.array(positions))[:, :: geometry.antennas_per_ru]
    else:
        s_active = np.zeros((block_length, 0), dtype=complex)
        gains = np.zeros((0, geometry.n_ru))

    chol, solved = [], []
    for b in range(geometry.n_ru):
        sigma_b = (s_active * gains[:, b]) @ s_active.conj().T + sigma_w2 * np.eye(block_length)
        try:
            factor = np.linalg.cholesky(sigma_b)
        except np.linalg.LinAlgError as e:
            raise np.linalg.LinAlgError(
                f"RU {b}: received covariance singular (sigma_w2={sigma_w2})"
            ) from e
        chol.append(factor)
        solved.append(sla.cho_solve((factor, True), s_active, check_finite=False))
    return GenieContext(
        chol=chol,
        solved=solved,
        s_active=s_active,
        gains=gains,
        index={o: k for k, o in enumerate(owners)},
        m_antennas=geometry.antennas_per_ru,
        sigma_w2=sigma_w2,
    )


def _column(ctx: GenieContext, message) -> int:
    try:
        return ctx.index[(message[0], int(message[1]))]
    except KeyError:
        raise ValueError(f"message {message} is not active in this slot") from None


def estimate_channel(ctx: GenieContext, message, b: int, y: np.ndarray) -> np.ndarray:
    """Linear MMSE estimate of the 1 x M channel from message (u, n) to RU b."""
    k = _column(ctx, message)
    m = ctx.m_antennas
    y_b = y[:, b * m : (b + 1) * m]
    return ctx.gains[k, b] * (ctx.solved[b][:, k].conj() @ y_b)


def analytic_mse(ctx: GenieContext, message, b: int) -> float:
    """Conditional MSE per channel coefficient: gamma - gamma^2 s^H Sigma_b^{-1} s."""
    k = _column(ctx, message)
    g = ctx.gains[k, b]
    return float(g - g**2 * np.real(ctx.s_active[:, k].conj() @ ctx.solved[b][:, k]))


def estimate_all(ctx: GenieContext, y: np.ndarray) -> np.ndarray:
    """Pooled (K, F) estimates for every active message, all RUs at once."""
    m = ctx.m_antennas
    out = np.empty((ctx.n_active, len(ctx.chol) * m), dtype=complex)
    for b in range(len(ctx.chol)):
        y_b = y[:, b * m : (b + 1) * m]
        out[:, b * m : (b + 1) * m] = ctx.gains[:, b : b + 1] * (ctx.solved[b].conj().T @ y_b)
    return out


def analytic_mse_all(ctx: GenieContext) -> np.ndarray:
    """(K, B) analytic per-coefficient MSE for every active message and RU."""
    out = np.empty((ctx.n_active, len(ctx.chol)))
    for b in range(len(ctx.chol)):
        quad_b = np.real(np.einsum("lk,lk->k", ctx.s_active.conj(), ctx.solved[b]))
        out[:, b] = ctx.gains[:, b] - ctx.gains[:, b] ** 2 * quad_b
    return out


def aggregate_mse(per_location_errors: list, n_components: int) -> float | None:
    """Per-component MSE averaged over detected messages, then locations.

    Each list entry holds, for one location, the squared channel error of
    every detected message summed over all n_components antennas.  Locations
    with nothing detected are excluded and the average renormalized over the
    rest; with nothing detected anywhere the result is absent (None).
    """
    included = [np.asarray(e, dtype=float) for e in per_location_errors if len(e) > 0]
    if not included:
        return None
    return sum(float(np.mean(errs)) for errs in included) / (len(included) * n_components)
