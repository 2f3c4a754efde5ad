import numpy as np
import pytest

from cfura.geometry import Point2D, PositionGrid, TorusMap, build_network
from cfura.scenario import LocationPrior


@pytest.fixture(scope="session")
def paper_network():
    return build_network(side=0.1, n1=4, n2=3, antennas_per_ru=2, rho=3.67, d0=0.01357)


def make_prior(rng, n_dim, n_grid, lam, weights=None, profile_lo=0.05, profile_hi=1.0):
    """Synthetic location prior detached from any geometry (unit torus)."""
    torus = TorusMap(Point2D(1.0, 0.0), Point2D(0.0, 1.0), 1, 1)
    pts = rng.random((n_grid, 2))
    if weights is None:
        w = np.full(n_grid, 1.0 / n_grid)
    else:
        w = np.asarray(weights, dtype=float)
    grid = PositionGrid(points=pts, weights=w, torus=torus)
    profiles = rng.uniform(profile_lo, profile_hi, (n_grid, n_dim))
    prior = object.__new__(LocationPrior)
    for key, val in dict(
        lam=lam, grid=grid, profiles=profiles, tile=None, geometry=None
    ).items():
        object.__setattr__(prior, key, val)
    return prior


def random_covariance(rng, n_dim, ridge=0.3):
    a = (rng.standard_normal((n_dim, n_dim)) + 1j * rng.standard_normal((n_dim, n_dim))) / np.sqrt(2)
    return a @ a.conj().T / n_dim + ridge * np.eye(n_dim)


def wirtinger_jacobian(fn, r, eps_scale=1e-5):
    """Central finite differences for the non-conjugate derivative d f_j / d r_i."""
    f = r.shape[0]
    eps = eps_scale * np.linalg.norm(r)
    jac = np.zeros((f, f), dtype=complex)
    for i in range(f):
        e = np.zeros(f, dtype=complex)
        e[i] = 1.0
        d_re = (fn(r + eps * e) - fn(r - eps * e)) / (2 * eps)
        d_im = (fn(r + 1j * eps * e) - fn(r - 1j * eps * e)) / (2 * eps)
        jac[i, :] = 0.5 * (d_re - 1j * d_im)
    return jac
