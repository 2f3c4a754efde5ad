"""Slot synthesis: codebooks, user activity, channels, received signal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import NetworkGeometry
from .rng import complex_normal
from .scenario import LocationPrior, Scenario


@dataclass(frozen=True)
class Codebook:
    """Columns are the codewords of one location, i.i.d. CN(0, 1/L) entries."""

    entries: np.ndarray  # (L, N_u)

    @property
    def block_length(self) -> int:
        return self.entries.shape[0]

    @property
    def n_codewords(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    """One slot's hidden state.

    Per location: the activity mask, the active rows' indices, their
    continuous positions, and the channel matrix X_u (inactive rows zero).
    """

    active: list[np.ndarray]     # (N_u,) bool per location
    indices: list[np.ndarray]    # active row indices per location
    positions: list[np.ndarray]  # (n_active, 2) per location, aligned with indices
    channels: list[np.ndarray]   # X_u, (N_u, F) complex per location

    @property
    def n_active(self) -> int:
        return int(sum(a.sum() for a in self.active))


@dataclass(frozen=True)
class ReceivedSignal:
    y: np.ndarray  # (L, F)
    sigma_w2: float


def sample_codebook(block_length: int, n_codewords: int, rng: np.random.Generator) -> Codebook:
    if block_length < 1 or n_codewords < 1:
        raise ValueError("codebook dimensions must be >= 1")
    entries = complex_normal(rng, (block_length, n_codewords), var=1.0 / block_length)
    return Codebook(entries=entries)


def channel_profiles(geometry: NetworkGeometry, positions: np.ndarray) -> np.ndarray:
    """Covariance-profile rows for many positions at once, (n, F)."""
    positions = np.atleast_2d(positions)
    d = np.stack(
        [geometry.torus.distances(positions, ru) for ru in geometry.ru_positions],
        axis=1,
    )
    d = d.reshape(len(positions), geometry.n_ru)
    gains = 1.0 / (1.0 + (d / geometry.cutoff_distance) ** geometry.pathloss_exponent)
    return np.repeat(gains, geometry.antennas_per_ru, axis=1)


def sample_location_channels(
    prior: LocationPrior, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """n active-channel rows from one location's continuous position law.

    Returns (positions (n, 2), channel rows (n, F)).  Positions are drawn
    from the continuous support, not the decoder's grid.
    """
    positions = prior.sample_positions(rng, n)
    profiles = channel_profiles(prior.geometry, positions)
    return positions, complex_normal(rng, profiles.shape, var=profiles)


def sample_ground_truth(
    priors: list[LocationPrior], codewords: list[int], rng: np.random.Generator
) -> GroundTruth:
    """Bernoulli activities, uniform continuous positions, Rayleigh channels."""
    f = priors[0].geometry.n_antennas
    active, indices, positions, channels = [], [], [], []
    for prior, n_u in zip(priors, codewords):
        mask = rng.random(n_u) < prior.lam
        idx = np.flatnonzero(mask)
        x = np.zeros((n_u, f), dtype=complex)
        if len(idx):
            pos, rows = sample_location_channels(prior, len(idx), rng)
        else:
            pos = np.empty((0, 2))
        if len(idx):
            x[idx] = rows
        active.append(mask)
        indices.append(idx)
        positions.append(pos)
        channels.append(x)
    return GroundTruth(active=active, indices=indices, positions=positions, channels=channels)


def synthesize(
    codebooks: list[Codebook],
    truth: GroundTruth,
    sigma_w2: float,
    rng: np.random.Generator,
) -> ReceivedSignal:
    """Y = sum_u S_u X_u + W with W i.i.d. CN(0, sigma_w2)."""
    if len(codebooks) != len(truth.channels):
        raise ValueError("one codebook per location required")
    block_length = codebooks[0].block_length
    f = truth.channels[0].shape[1]
    y = np.zeros((block_length, f), dtype=complex)
    for cb, x in zip(codebooks, truth.channels):
        if cb.n_codewords != x.shape[0] or cb.block_length != block_length:
            raise ValueError(
                f"shape mismatch: codebook {cb.entries.shape} vs channels {x.shape}"
            )
        y += cb.entries @ x
    if sigma_w2 > 0:
        y += complex_normal(rng, (block_length, f), var=sigma_w2)
    return ReceivedSignal(y=y, sigma_w2=sigma_w2)


def sample_slot(
    scenario: Scenario,
    rng_codebook: np.random.Generator,
    rng_truth: np.random.Generator,
    rng_noise: np.random.Generator,
) -> tuple[list[Codebook], GroundTruth, ReceivedSignal]:
    """Draw one full RACH slot from its three decorrelated substreams."""
    codebooks = [
        sample_codebook(scenario.block_length, n_u, rng_codebook)
        for n_u in scenario.codewords
    ]
    truth = sample_ground_truth(scenario.priors, scenario.codewords, rng_truth)
    signal = synthesize(codebooks, truth, scenario.noise.sigma_w2, rng_noise)
    return codebooks, truth, signal
