import numpy as np
import pytest

from cfura import denoiser as dn
from cfura.geometry import build_position_grid, nearest_grid_point
from cfura.positioning import error_cdf, map_indices, map_objectives, map_position, oracle_position
from cfura.rng import complex_normal

from conftest import make_prior, random_covariance


@pytest.fixture
def rng():
    return np.random.default_rng(23)


def test_single_grid_point_trivial(rng):
    prior = make_prior(rng, 3, 1, 0.5)
    est = map_position(rng.standard_normal(3) + 0j, prior, np.eye(3))
    assert est.grid_index == 0
    assert np.allclose(est.q_hat, prior.grid.points[0])


def test_tie_breaks_to_smallest_index(rng):
    # identical profiles and uniform weights at every point: all objectives equal
    prior = make_prior(rng, 2, 4, 0.5, profile_lo=0.5, profile_hi=0.5)
    est = map_position(rng.standard_normal(2) + 0j, prior, np.eye(2))
    assert est.grid_index == 0
    assert np.allclose(est.objective, est.objective[0])


def test_two_hypothesis_likelihood_comparison(rng):
    # r drawn with huge norm under point 1's much larger profile -> point 1 wins
    prior = make_prior(rng, 2, 2, 0.5)
    object.__setattr__(prior, "profiles", np.array([[0.01, 0.01], [10.0, 10.0]]))
    c = 0.05 * np.eye(2)
    r = complex_normal(rng, 2, var=10.0)
    est = map_position(r, prior, c)
    # direct two-hypothesis comparison
    obj = []
    for q in range(2):
        mix = c + np.diag(prior.profiles[q])
        obj.append(
            np.log(prior.grid.weights[q])
            - np.log(np.linalg.det(mix).real)
            - np.real(r @ np.linalg.inv(mix) @ r.conj())
        )
    assert est.grid_index == int(np.argmax(obj))
    assert est.grid_index == 1
    assert np.allclose(est.objective, obj, atol=1e-10)


def test_argmax_matches_exhaustive_recomputation(rng):
    prior = make_prior(rng, 4, 6, 0.3)
    c = random_covariance(rng, 4)
    ws = dn.prepare(prior, c)
    rows = complex_normal(rng, (30, 4), var=1.0)
    idx, obj = map_indices(ws, rows)
    c_dense = np.asarray(c)
    for n in range(30):
        direct = []
        for q in range(6):
            mix = c_dense + np.diag(prior.profiles[q])
            direct.append(
                np.log(prior.grid.weights[q])
                - np.log(np.linalg.det(mix).real)
                - np.real(rows[n] @ np.linalg.inv(mix) @ rows[n].conj())
            )
        assert idx[n] == int(np.argmax(direct))
        assert np.allclose(obj[n], direct, atol=1e-9)


def test_objective_invariant_to_weight_rescaling(rng):
    # adding a constant to all log-weights shifts the objective uniformly
    prior = make_prior(rng, 3, 5, 0.4)
    c = random_covariance(rng, 3)
    r = complex_normal(rng, 3, var=1.0)
    base = map_position(r, prior, c)
    import dataclasses
    from cfura.geometry import PositionGrid

    scaled_grid = PositionGrid(
        points=prior.grid.points, weights=prior.grid.weights.copy(), torus=prior.grid.torus
    )
    scaled = dataclasses.replace(prior, grid=scaled_grid)
    est2 = map_position(r, scaled, c)
    diff = est2.objective - base.objective
    assert np.allclose(diff, diff[0], atol=1e-10)
    assert est2.grid_index == base.grid_index


def test_oracle_position_delegates(paper_network, rng):
    tile = paper_network.tiles[3]
    grid = build_position_grid(tile, 8, paper_network.torus)
    q0 = tile.sample_point(rng)[0]
    assert oracle_position(q0, grid) == nearest_grid_point(grid, q0)


def test_oracle_no_worse_than_map(paper_network, rng):
    # oracle optimality: per sample |q*-q0| <= |q_hat-q0|
    tile = paper_network.tiles[0]
    grid = build_position_grid(tile, 4, paper_network.torus)
    for _ in range(50):
        q0 = tile.sample_point(rng)[0]
        oi = oracle_position(q0, grid)
        any_idx = rng.integers(len(grid))
        d_oracle = paper_network.torus.distance(grid.points[oi], q0)
        d_other = paper_network.torus.distance(grid.points[any_idx], q0)
        assert d_oracle <= d_other + 1e-12


def test_map_concentrates_as_noise_vanishes(rng):
    # r drawn from a grid point's exact model: fraction of correct argmax
    # grows as the effective noise shrinks
    prior = make_prior(rng, 6, 4, 0.5)
    # well-separated hypotheses: each point is strong on its own antenna pair
    profiles = np.full((4, 6), 0.02)
    for q in range(4):
        profiles[q, q] = 0.9
        profiles[q, (q + 1) % 6] = 0.6
    object.__setattr__(prior, "profiles", profiles)
    hits = {}
    for c_level in (0.5, 0.005):
        c = c_level * np.eye(6)
        ws = dn.prepare(prior, c)
        correct = 0
        trials = 300
        for _ in range(trials):
            q = rng.integers(4)
            h = complex_normal(rng, 6, var=prior.profiles[q])
            r = h + complex_normal(rng, 6, var=c_level)
            idx, _ = map_indices(ws, r[None])
            correct += idx[0] == q
        hits[c_level] = correct / trials
    assert hits[0.005] > hits[0.5]
    assert hits[0.005] > 0.55


def test_error_cdf_step_at_zero_and_dominance(rng):
    probs, values = error_cdf(np.zeros(10))
    assert np.all(values == 0.0)
    errs_map = rng.random(400) + 0.05
    errs_oracle = errs_map * rng.random(400)  # pointwise smaller
    p, v_map = error_cdf(errs_map)
    _, v_oracle = error_cdf(errs_oracle)
    assert np.all(v_oracle <= v_map + 1e-12)  # oracle quantiles dominate
    assert np.all(np.diff(v_map) >= -1e-15)
    with pytest.raises(ValueError):
        error_cdf(np.array([]))
