"""Scenario configuration: activity priors, SNR normalization, codebook layout.

Every SNR quantity is stored linear internally; dB appears only at the
config boundary.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    LocationTile,
    NetworkGeometry,
    PositionGrid,
    build_network,
    build_position_grid,
    covariance_profile,
    torus_distance,
)


class ConfigError(ValueError):
    """Invalid scenario configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class LocationPrior:
    """Activity probability, position grid and channel profiles for one location.

    `tile` is the continuous position support; None means the whole torus
    (single-codebook baseline).  The grid and per-grid-point covariance
    profiles are what the decoder believes; ground truth is always sampled
    from the continuous support.
    """

    lam: float
    grid: PositionGrid
    profiles: np.ndarray  # (n_grid, F), diagonal of the channel covariance per point
    tile: LocationTile | None
    geometry: NetworkGeometry

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"activity probability {self.lam} outside [0, 1]")
        if len(self.profiles) != len(self.grid):
            raise ConfigError("one covariance profile per grid point required")
        if np.any(self.profiles <= 0) or np.any(self.profiles > 1.0):
            raise ConfigError("profile entries must lie in (0, 1]")

    def sample_positions(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n continuous user positions from this location's support."""
        if self.tile is not None:
            return self.tile.sample_point(rng, n)
        return self.geometry.torus.uniform_points(n, rng)


@dataclass(frozen=True)
class NoiseModel:
    snr: float       # linear transmit SNR
    sigma_w2: float  # per-sample noise variance, exactly 1/(L*snr)

    @classmethod
    def from_snr(cls, block_length: int, snr: float) -> "NoiseModel":
        return cls(snr=snr, sigma_w2=noise_variance(block_length, snr))


@dataclass
class ScenarioConfig:
    # geometry
    side: float = 0.1
    n1: int = 4
    n2: int = 3
    antennas_per_ru: int = 2
    rho: float = 3.67
    d0: float = 0.01357
    # airlink
    block_length: int = 1024          # L
    codewords_per_location: int = 2048  # N_u
    lambda_raster: tuple = (0.009, 0.005, 0.0005, 0.0002)
    snr_rx_db: float = 10.0
    # decoder
    grid_order: int = 8               # k; matched denoiser uses k, mismatched uses 1
    amp_iterations: int = 10          # T
    onsager_mode: str = "empirical"   # empirical | se
    c_source: str = "se"              # se | empirical
    mode: str = "location_based"      # location_based | single_codebook
    denoiser_mode: str = "matched"    # matched | mismatched
    # experiment machinery
    seed: int = 1234
    runs: int = 100
    se_samples: int = 20000
    sc_grid_thin: int = 4             # SC grid gets ~thin x fewer points per tile

    def validate(self) -> "ScenarioConfig":
        if self.block_length < 1 or self.codewords_per_location < 1:
            raise ConfigError("block length and codebook size must be >= 1")
        if self.amp_iterations < 1:
            raise ConfigError("amp_iterations must be >= 1")
        if not self.lambda_raster or not all(0.0 <= l <= 1.0 for l in self.lambda_raster):
            raise ConfigError("lambda raster entries must lie in [0, 1]")
        if self.grid_order < 1:
            raise ConfigError("grid_order must be >= 1")
        if self.onsager_mode not in ("empirical", "se"):
            raise ConfigError(f"unknown onsager mode {self.onsager_mode!r}")
        if self.c_source not in ("se", "empirical"):
            raise ConfigError(f"unknown effective-covariance source {self.c_source!r}")
        if self.mode not in ("location_based", "single_codebook"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.denoiser_mode not in ("matched", "mismatched"):
            raise ConfigError(f"unknown denoiser mode {self.denoiser_mode!r}")
        if self.mode == "single_codebook" and self.denoiser_mode == "mismatched":
            raise ConfigError("the single-codebook baseline has no mismatched variant")
        if self.runs < 1 or self.se_samples < 1 or self.sc_grid_thin < 1:
            raise ConfigError("runs, se_samples and sc_grid_thin must be >= 1")
        return self

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw).validate()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda_raster"] = list(self.lambda_raster)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "lambda_raster" in d:
            d = dict(d, lambda_raster=tuple(d["lambda_raster"]))
        return cls(**d).validate()


PRESETS = {
    # CI-friendly scale: same network and SNR as the paper preset, smaller codebooks
    "desk": dict(
        block_length=256,
        codewords_per_location=512,
        grid_order=4,
        amp_iterations=8,
        runs=20,
    ),
    # full-scale parameter set
    "paper": dict(
        block_length=1024,
        codewords_per_location=2048,
        grid_order=8,
        amp_iterations=10,
        runs=100,
    ),
}


def preset_config(name: str, **overrides) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (have {sorted(PRESETS)})")
    return ScenarioConfig(**{**PRESETS[name], **overrides}).validate()


def noise_variance(block_length: int, snr: float) -> float:
    """Per-sample noise variance 1/(L*SNR)."""
    if block_length < 1 or snr <= 0:
        raise ConfigError("need block_length >= 1 and snr > 0")
    return 1.0 / (block_length * snr)


def compute_transmit_snr(geometry: NetworkGeometry, snr_rx_db: float) -> float:
    """Linear transmit SNR that realizes snr_rx_db at the reference distance.

    The reference distance is from a tile centroid to its nearest RU
    (side/sqrt(3) on this layout), so the received SNR at a location center
    equals the requested value.
    """
    centroid = geometry.tiles[0].centroid
    dist = min(
        torus_distance(geometry, centroid, ru) for ru in geometry.ru_positions
    )
    snr_rx = 10.0 ** (snr_rx_db / 10.0)
    return snr_rx * (1.0 + (dist / geometry.cutoff_distance) ** geometry.pathloss_exponent)


def build_geometry(cfg: ScenarioConfig) -> NetworkGeometry:
    return build_network(cfg.side, cfg.n1, cfg.n2, cfg.antennas_per_ru, cfg.rho, cfg.d0)


def build_priors(geometry: NetworkGeometry, cfg: ScenarioConfig) -> list[LocationPrior]:
    """One prior per tile, raster-assigned activity, grid per denoiser mode."""
    k = cfg.grid_order if cfg.denoiser_mode == "matched" else 1
    raster = cfg.lambda_raster
    priors = []
    for u, tile in enumerate(geometry.tiles):
        grid = build_position_grid(tile, k, geometry.torus)
        profiles = np.array([covariance_profile(geometry, p) for p in grid.points])
        priors.append(
            LocationPrior(
                lam=float(raster[u % len(raster)]),
                grid=grid,
                profiles=profiles,
                tile=tile,
                geometry=geometry,
            )
        )
    return priors


def single_codebook_prior(
    geometry: NetworkGeometry, cfg: ScenarioConfig, thin: int = 1
) -> LocationPrior:
    """Whole-network single location: pooled codebook, union position grid.

    The activity probability preserves the expected number of active
    messages of the location-based scenario.  `thin` coarsens each tile's
    grid contribution by ~that factor in point count (decoder cost control).
    """
    n_total = geometry.n_tiles * cfg.codewords_per_location
    lams = [cfg.lambda_raster[u % len(cfg.lambda_raster)] for u in range(geometry.n_tiles)]
    lam = sum(l * cfg.codewords_per_location for l in lams) / n_total

    k_sc = max(1, int(round(cfg.grid_order / math.sqrt(thin))))
    points = np.concatenate(
        [build_position_grid(t, k_sc, geometry.torus).points for t in geometry.tiles]
    )
    grid = PositionGrid(
        points=points,
        weights=np.full(len(points), 1.0 / len(points)),
        torus=geometry.torus,
    )
    profiles = np.array([covariance_profile(geometry, p) for p in grid.points])
    return LocationPrior(lam=lam, grid=grid, profiles=profiles, tile=None, geometry=geometry)


@dataclass(frozen=True)
class Scenario:
    """Everything a run needs: geometry, priors, codebook sizes, noise."""

    cfg: ScenarioConfig
    geometry: NetworkGeometry
    priors: list[LocationPrior]
    codewords: list[int]       # N_u per location
    noise: NoiseModel

    @property
    def block_length(self) -> int:
        return self.cfg.block_length

    @property
    def alphas(self) -> np.ndarray:
        return np.array(self.codewords, dtype=float) / self.block_length


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    cfg = cfg.validate()
    geometry = build_geometry(cfg)
    snr = compute_transmit_snr(geometry, cfg.snr_rx_db)
    noise = NoiseModel.from_snr(cfg.block_length, snr)
    if cfg.mode == "location_based":
        priors = build_priors(geometry, cfg)
        codewords = [cfg.codewords_per_location] * geometry.n_tiles
    else:
        priors = [single_codebook_prior(geometry, cfg, thin=cfg.sc_grid_thin)]
        codewords = [geometry.n_tiles * cfg.codewords_per_location]
    return Scenario(cfg=cfg, geometry=geometry, priors=priors, codewords=codewords, noise=noise)
