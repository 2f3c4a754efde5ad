import numpy as np
import pytest

from cfura.airlink import (
    Codebook,
    channel_profiles,
    sample_codebook,
    sample_ground_truth,
    sample_slot,
    synthesize,
)
from cfura.geometry import covariance_profile
from cfura.rng import RngStreams
from cfura.scenario import build_priors, build_scenario, preset_config, ScenarioConfig


@pytest.fixture(scope="module")
def priors(paper_network):
    return build_priors(paper_network, ScenarioConfig(grid_order=2))


def test_codebook_statistics():
    rng = np.random.default_rng(0)
    cb = sample_codebook(1024, 2048, rng)
    assert cb.entries.shape == (1024, 2048)
    n = cb.entries.size
    # per-entry variance 1/L within 1% over ~2e6 entries
    emp_var = np.mean(np.abs(cb.entries) ** 2)
    assert emp_var == pytest.approx(1.0 / 1024, rel=0.01)
    # mean column norm^2 is 1 within 3 sigma (var of |s|^2 entries ~ 1/L^2 per entry)
    col_norms = np.sum(np.abs(cb.entries) ** 2, axis=0)
    sigma = col_norms.std(ddof=1) / np.sqrt(len(col_norms))
    assert abs(col_norms.mean() - 1.0) < 3 * sigma + 1e-3
    assert abs(np.mean(cb.entries)) < 3 / np.sqrt(n * 1024)


def test_codebook_determinism():
    a = sample_codebook(64, 32, np.random.default_rng(7))
    b = sample_codebook(64, 32, np.random.default_rng(7))
    assert np.array_equal(a.entries, b.entries)


def test_ground_truth_degenerate_activity(paper_network, priors):
    import dataclasses

    rng = np.random.default_rng(1)
    silent = [dataclasses.replace(p, lam=0.0) for p in priors]
    truth = sample_ground_truth(silent, [16] * 24, rng)
    assert truth.n_active == 0
    assert all(np.all(x == 0) for x in truth.channels)

    certain = [dataclasses.replace(priors[0], lam=1.0)]
    truth1 = sample_ground_truth(certain, [1], rng)
    assert truth1.n_active == 1
    assert truth1.channels[0].shape == (1, 24)


def test_ground_truth_positions_inside_tiles(paper_network, priors):
    rng = np.random.default_rng(2)
    import dataclasses

    busy = [dataclasses.replace(p, lam=0.5) for p in priors]
    truth = sample_ground_truth(busy, [64] * 24, rng)
    for prior, pos in zip(busy, truth.positions):
        for q in pos:
            assert prior.tile.contains(q, tol=1e-12)


def test_channel_variance_matches_profile(paper_network, priors):
    # E|h_f|^2 at a fixed position equals the covariance profile within 3 sigma
    rng = np.random.default_rng(3)
    prior = priors[0]
    q = prior.tile.sample_point(rng)[0]
    prof = covariance_profile(paper_network, q)
    n = 10_000
    h = np.sqrt(prof / 2) * (rng.standard_normal((n, 24)) + 1j * rng.standard_normal((n, 24)))
    emp = np.mean(np.abs(h) ** 2, axis=0)
    # |h|^2 is exponential with variance prof^2
    assert np.all(np.abs(emp - prof) < 3 * prof / np.sqrt(n))
    # the sampler itself: profiles of many sampled positions respect the block structure
    prof_many = channel_profiles(paper_network, prior.tile.sample_point(rng, 50))
    assert np.allclose(prof_many[:, 0::2], prof_many[:, 1::2])


def test_synthesize_noise_only(paper_network, priors):
    import dataclasses

    rng = np.random.default_rng(4)
    silent = [dataclasses.replace(p, lam=0.0) for p in priors]
    truth = sample_ground_truth(silent, [32] * 24, rng)
    cbs = [sample_codebook(128, 32, rng) for _ in range(24)]
    noiseless = synthesize(cbs, truth, 0.0, rng)
    assert np.all(noiseless.y == 0)
    sigma_w2 = 0.25
    noisy = synthesize(cbs, truth, sigma_w2, rng)
    emp = np.mean(np.abs(noisy.y) ** 2)
    n = noisy.y.size
    assert abs(emp - sigma_w2) < 3 * sigma_w2 / np.sqrt(n)


def test_synthesize_power_budget(paper_network, priors):
    # E||S_u X_u||_F^2 = sum over active rows of sum_f profile_f  (E||s||^2 = 1)
    import dataclasses

    rng = np.random.default_rng(5)
    prior = dataclasses.replace(priors[0], lam=1.0)
    reps = 400
    powers = []
    expected = []
    for _ in range(reps):
        truth = sample_ground_truth([prior], [8], rng)
        cbs = [sample_codebook(64, 8, rng)]
        sig = synthesize(cbs, truth, 0.0, rng)
        powers.append(np.sum(np.abs(sig.y) ** 2))
        expected.append(np.sum(channel_profiles(paper_network, truth.positions[0])))
    powers = np.asarray(powers)
    scale = powers.mean()
    # signal power budget within 3 sigma of the profile-sum prediction
    assert abs(powers.mean() - np.mean(expected)) < 3 * powers.std(ddof=1) / np.sqrt(reps)


def test_synthesize_shape_mismatch_rejected(paper_network, priors):
    rng = np.random.default_rng(6)
    truth = sample_ground_truth(priors[:2], [8, 8], rng)
    cbs = [sample_codebook(64, 8, rng), sample_codebook(64, 9, rng)]
    with pytest.raises(ValueError):
        synthesize(cbs, truth, 0.1, rng)


def test_slot_determinism():
    cfg = preset_config("desk", codewords_per_location=32, block_length=64)
    sc = build_scenario(cfg)
    streams = RngStreams(cfg.seed)
    a = sample_slot(sc, streams.generator("codebook", 0), streams.generator("truth", 0), streams.generator("noise", 0))
    b = sample_slot(sc, streams.generator("codebook", 0), streams.generator("truth", 0), streams.generator("noise", 0))
    assert np.array_equal(a[2].y, b[2].y)
    # different run index decorrelates
    c = sample_slot(sc, streams.generator("codebook", 1), streams.generator("truth", 1), streams.generator("noise", 1))
    assert not np.array_equal(a[2].y, c[2].y)
