import numpy as np
import pytest

from cfura import denoiser as dn
from cfura.denoiser import NumericalError

from conftest import make_prior, random_covariance, wirtinger_jacobian


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def test_prepare_identity_case(rng):
    # C = I, Sigma(q) = I: A = I/2, log|Sigma+C| = F log 2
    prior = make_prior(rng, 3, 1, 0.5, profile_lo=1.0, profile_hi=1.0)
    ws = dn.prepare(prior, np.eye(3))
    assert np.allclose(ws.a_mats[0], 0.5 * np.eye(3))
    assert ws.logdet_mix[0] == pytest.approx(3 * np.log(2.0))
    assert ws.logdet_c == pytest.approx(0.0)


def test_prepare_rejects_non_pd():
    rng = np.random.default_rng(0)
    prior = make_prior(rng, 3, 2, 0.5)
    bad = np.diag([1.0, -1.0, 1.0]).astype(complex)
    with pytest.raises(NumericalError):
        dn.prepare(prior, bad)


def test_a_matrix_spectral_radius_below_one(rng):
    for _ in range(10):
        prior = make_prior(rng, 4, 3, 0.3)
        ws = dn.prepare(prior, random_covariance(rng, 4))
        for a in ws.a_mats:
            assert np.max(np.abs(np.linalg.eigvals(a))) <= 1.0 + 1e-12


def test_conditional_mean(rng):
    prior = make_prior(rng, 1, 1, 0.5)
    gamma = prior.profiles[0, 0]
    c = 0.7
    ws = dn.prepare(prior, c * np.eye(1))
    r = np.array([1.3 - 0.4j])
    # scalar Wiener filter oracle
    assert dn.conditional_mean(ws, r, 0)[0] == pytest.approx(r[0] * gamma / (gamma + c))
    assert np.allclose(dn.conditional_mean(ws, np.zeros(1, complex), 0), 0.0)


def test_map_log_ratio_values(rng):
    # r=0, lambda=0.5, Sigma=C=I, F=1: ratio of determinants -> log 2
    prior = make_prior(rng, 1, 1, 0.5, profile_lo=1.0, profile_hi=1.0)
    ws = dn.prepare(prior, np.eye(1))
    assert dn.map_log_ratio(ws, np.zeros(1, complex), 0) == pytest.approx(np.log(2.0))
    # degenerate priors
    ws0 = dn.prepare(make_prior(rng, 1, 1, 0.0, profile_lo=1.0, profile_hi=1.0), np.eye(1))
    ws1 = dn.prepare(make_prior(rng, 1, 1, 1.0, profile_lo=1.0, profile_hi=1.0), np.eye(1))
    r = np.array([0.3 + 0.1j])
    assert dn.map_log_ratio(ws0, r, 0) == np.inf
    assert dn.map_log_ratio(ws1, r, 0) == -np.inf


def test_map_log_ratio_against_dense_inverse(rng):
    # F=2 random instance vs naive dense computation
    for _ in range(20):
        prior = make_prior(rng, 2, 3, 0.37)
        c = random_covariance(rng, 2)
        ws = dn.prepare(prior, c)
        r = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        c_inv = np.linalg.inv(c)
        for q in range(3):
            mix = c + np.diag(prior.profiles[q])
            lam = prior.lam
            expected = (
                np.log((1 - lam) / lam)
                + np.log(np.linalg.det(mix).real)
                - np.log(np.linalg.det(c).real)
                - np.real(r @ (c_inv - np.linalg.inv(mix)) @ r.conj())
            )
            assert dn.map_log_ratio(ws, r, q) == pytest.approx(expected, abs=1e-10)


def test_posterior_mean_degenerate_cases(rng):
    prior = make_prior(rng, 3, 1, 1.0)
    c = random_covariance(rng, 3)
    ws = dn.prepare(prior, c)
    r = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    # lambda = 1, single point: pure linear MMSE
    assert np.allclose(dn.posterior_mean(ws, r), r @ ws.a_mats[0], atol=1e-14)
    # r = 0 maps to 0
    assert np.allclose(dn.posterior_mean(ws, np.zeros(3, complex)), 0.0)
    # lambda = 0: identically zero
    ws0 = dn.prepare(make_prior(rng, 3, 2, 0.0), c)
    assert np.allclose(dn.posterior_mean(ws0, r), 0.0)
    assert np.allclose(dn.jacobian(ws0, r), 0.0)


def test_duplicate_grid_point_consistency(rng):
    # splitting one grid point's weight across duplicates changes nothing
    for mixture in ("posterior", "prior"):
        base = make_prior(rng, 3, 2, 0.4)
        dup = make_prior(rng, 3, 3, 0.4)
        object.__setattr__(dup.grid, "points", np.vstack([base.grid.points, base.grid.points[1]]))
        object.__setattr__(dup.grid, "weights", np.array([0.5, 0.25, 0.25]))
        object.__setattr__(dup, "profiles", np.vstack([base.profiles, base.profiles[1]]))
        c = random_covariance(rng, 3)
        ws_base = dn.prepare(base, c, mixture=mixture)
        ws_dup = dn.prepare(dup, c, mixture=mixture)
        r = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        assert np.allclose(dn.posterior_mean(ws_base, r), dn.posterior_mean(ws_dup, r), atol=1e-12)
        assert np.allclose(dn.jacobian(ws_base, r), dn.jacobian(ws_dup, r), atol=1e-12)


def test_two_equal_grid_points_collapse(rng):
    single = make_prior(rng, 1, 1, 0.3, profile_lo=0.6, profile_hi=0.6)
    double = make_prior(rng, 1, 2, 0.3, profile_lo=0.6, profile_hi=0.6)
    c = np.eye(1) * 0.4
    ws1 = dn.prepare(single, c)
    ws2 = dn.prepare(double, c)
    for _ in range(5):
        r = rng.standard_normal(1) + 1j * rng.standard_normal(1)
        assert dn.posterior_mean(ws1, r)[0] == pytest.approx(dn.posterior_mean(ws2, r)[0], abs=1e-12)


def test_jacobian_matches_wirtinger_fd(rng):
    for mixture in ("posterior", "prior"):
        worst = 0.0
        for f in (2, 4):
            for lam in (0.2, 0.8):
                prior = make_prior(rng, f, 3, lam)
                ws = dn.prepare(prior, random_covariance(rng, f), mixture=mixture)
                for _ in range(5):
                    r = rng.standard_normal(f) + 1j * rng.standard_normal(f)
                    jac = dn.jacobian(ws, r)
                    jac_fd = wirtinger_jacobian(lambda x: dn.posterior_mean(ws, x), r)
                    scale = max(np.max(np.abs(jac_fd)), 1e-12)
                    worst = max(worst, np.max(np.abs(jac - jac_fd)) / scale)
        assert worst <= 1e-6


def test_jacobian_at_zero_is_first_term_only(rng):
    prior = make_prior(rng, 3, 2, 0.4)
    c = random_covariance(rng, 3)
    ws = dn.prepare(prior, c)
    r0 = np.zeros(3, dtype=complex)
    qf0, qf = dn._quad_forms(ws, r0[None])
    w_act, _ = dn._activity_weights(ws, qf0, qf)
    expected = np.tensordot(w_act[:, 0], ws.a_mats, axes=1)
    assert np.allclose(dn.jacobian(ws, r0), expected, atol=1e-14)


def test_mean_jacobian_matches_rowwise_average(rng):
    for mixture in ("posterior", "prior"):
        prior = make_prior(rng, 4, 3, 0.3)
        ws = dn.prepare(prior, random_covariance(rng, 4), mixture=mixture)
        rows = rng.standard_normal((40, 4)) + 1j * rng.standard_normal((40, 4))
        res = dn.denoise_rows(ws, rows, want_jacobian=True)
        assert np.allclose(res.mean_jacobian, dn.jacobian_rows(ws, rows).mean(axis=0), atol=1e-12)


def test_activity_weight_in_unit_interval(rng):
    prior = make_prior(rng, 3, 4, 0.15)
    ws = dn.prepare(prior, random_covariance(rng, 3))
    rows = 3.0 * (rng.standard_normal((100, 3)) + 1j * rng.standard_normal((100, 3)))
    qf0, qf = dn._quad_forms(ws, rows)
    w_act, w0 = dn._activity_weights(ws, qf0, qf)
    assert np.all(w_act >= 0) and np.all(w_act <= 1)
    assert np.all(w0 >= 0) and np.all(w0 <= 1)
    assert np.allclose(w_act.sum(axis=0) + w0, 1.0, atol=1e-12)


def test_monotone_shrinkage_when_profiles_below_noise(rng):
    # sufficient regime: all profiles <= C -> ||eta(r)|| <= ||r||
    prior = make_prior(rng, 3, 3, 0.5, profile_lo=0.05, profile_hi=0.5)
    ws = dn.prepare(prior, np.eye(3))
    for _ in range(50):
        r = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        assert np.linalg.norm(dn.posterior_mean(ws, r)) <= np.linalg.norm(r) + 1e-12


def test_blocked_batch_matches_unblocked(rng, monkeypatch):
    prior = make_prior(rng, 4, 5, 0.25)
    ws = dn.prepare(prior, random_covariance(rng, 4))
    rows = rng.standard_normal((700, 4)) + 1j * rng.standard_normal((700, 4))
    full = dn.denoise_rows(ws, rows, want_jacobian=True)
    monkeypatch.setattr(dn, "_block_size", lambda ws, budget_mb=256: 128)
    blocked = dn.denoise_rows(ws, rows, want_jacobian=True)
    assert np.allclose(full.eta, blocked.eta, atol=1e-13)
    assert np.allclose(full.mean_jacobian, blocked.mean_jacobian, atol=1e-13)
