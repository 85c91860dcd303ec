import numpy as np
import pytest

from spilab import forward

from oracles import empirical_snr_db, measure_direct


def test_pattern_determinism():
    a = forward.gen_patterns(8, 4, 4, "gaussian", seed=21)
    b = forward.gen_patterns(8, 4, 4, "gaussian", seed=21)
    assert np.array_equal(a.rows, b.rows)


def test_pattern_kinds_and_values():
    bern = forward.gen_patterns(5, 3, 3, "bernoulli01", seed=1)
    assert set(np.unique(bern.rows)) <= {0.0, 1.0}
    rad = forward.gen_patterns(5, 3, 3, "rademacher", seed=1)
    assert set(np.unique(rad.rows)) <= {-1.0, 1.0}
    gau = forward.gen_patterns(5, 3, 3, "gaussian", seed=1)
    assert gau.rows.shape == (5, 9)


def test_bernoulli_grand_mean_law_of_large_numbers():
    ps = forward.gen_patterns(1000, 32, 32, "bernoulli01", seed=99)
    assert 0.48 <= ps.rows.mean() <= 0.52


def test_compression_ratio_counting():
    ps = forward.gen_patterns(16 * 16, 16, 16, "bernoulli01", seed=0)
    assert ps.compression_ratio == 1.0
    assert forward.pattern_count_for_cr(0.25, 64, 64) == 1024
    with pytest.raises(ValueError):
        forward.pattern_count_for_cr(0.0, 8, 8)


def test_invalid_pattern_args():
    with pytest.raises(ValueError):
        forward.gen_patterns(0, 4, 4, "gaussian", seed=0)
    with pytest.raises(ValueError):
        forward.gen_patterns(4, 4, 4, "uniform", seed=0)
    with pytest.raises(ValueError):
        forward.gen_patterns(4, 4, 4, "gaussian", seed=-3)


def test_measure_identity_sampling():
    rng = np.random.default_rng(2)
    img = rng.random((3, 3))
    ps = forward.gen_patterns(9, 3, 3, "gaussian", seed=5)
    rows = np.eye(9)
    rows.flags.writeable = False
    ps = forward.PatternSet(kind="gaussian", count=9, height=3, width=3,
                            seed=5, rows=rows)
    m = forward.measure(img, ps)
    assert np.allclose(m.values, img.ravel(), atol=1e-12)


def test_measure_all_ones_pattern_sums_pixels():
    img = np.random.default_rng(3).random((4, 5))
    rows = np.ones((1, 20))
    rows.flags.writeable = False
    ps = forward.PatternSet(kind="bernoulli01", count=1, height=4, width=5,
                            seed=0, rows=rows)
    m = forward.measure(img, ps)
    assert abs(m.values[0] - img.sum()) < 1e-10


def test_measure_matches_direct_summation_oracle():
    rng = np.random.default_rng(4)
    img = rng.random((6, 6))
    ps = forward.gen_patterns(10, 6, 6, "gaussian", seed=17)
    m = forward.measure(img, ps)
    assert np.abs(m.values - measure_direct(img, ps.rows)).max() < 1e-10


def test_measure_linearity():
    rng = np.random.default_rng(5)
    x, z = rng.random((2, 5, 5))
    ps = forward.gen_patterns(12, 5, 5, "rademacher", seed=8)
    lhs = forward.measure(0.7 * x + 0.2 * z, ps).values
    rhs = 0.7 * forward.measure(x, ps).values + 0.2 * forward.measure(z, ps).values
    assert np.abs(lhs - rhs).max() < 1e-10


def test_measure_dimension_mismatch():
    ps = forward.gen_patterns(4, 4, 4, "gaussian", seed=0)
    with pytest.raises(ValueError):
        forward.measure(np.zeros((5, 4)), ps)


def test_add_noise_determinism_and_metadata():
    img = np.random.default_rng(6).random((8, 8))
    ps = forward.gen_patterns(32, 8, 8, "bernoulli01", seed=1)
    clean = forward.measure(img, ps)
    n1 = forward.add_noise(clean, 20.0, noise_seed=77)
    n2 = forward.add_noise(clean, 20.0, noise_seed=77)
    assert np.array_equal(n1.values, n2.values)
    assert n1.snr_db == 20.0 and n1.noise_seed == 77 and n1.samplings == 1


def test_add_noise_effectively_noiseless_at_300db():
    img = np.random.default_rng(7).random((8, 8))
    ps = forward.gen_patterns(16, 8, 8, "bernoulli01", seed=2)
    clean = forward.measure(img, ps)
    noisy = forward.add_noise(clean, 300.0, noise_seed=1)
    rel = np.abs(noisy.values - clean.values) / np.abs(clean.values)
    assert rel.max() < 1e-10


def _synthetic_measurement(m, seed):
    values = 5.0 + np.random.default_rng(seed).standard_normal(m)
    return forward.Measurement(values=values, pattern_kind="gaussian",
                               pattern_count=m, height=1, width=m,
                               pattern_seed=0)


def test_add_noise_hits_target_snr():
    clean = _synthetic_measurement(10 ** 4, seed=8)
    noisy = forward.add_noise(clean, 20.0, noise_seed=4)
    assert abs(empirical_snr_db(clean.values, noisy.values) - 20.0) < 0.5


def test_average_samplings_single_draw_matches_add_noise():
    img = np.random.default_rng(9).random((6, 6))
    ps = forward.gen_patterns(18, 6, 6, "bernoulli01", seed=5)
    avg = forward.average_samplings(img, ps, 25.0, n=1, seed=42)
    clean = forward.measure(img, ps)
    seed0 = int(np.random.SeedSequence(42).generate_state(1, dtype=np.uint64)[0])
    direct = forward.add_noise(clean, 25.0, seed0)
    assert np.array_equal(avg.values, direct.values)
    assert avg.samplings == 1


def test_average_samplings_snr_gain():
    img = np.random.default_rng(10).random((8, 8))
    ps = forward.gen_patterns(10 ** 4, 8, 8, "gaussian", seed=6)
    clean = forward.measure(img, ps)
    avg = forward.average_samplings(img, ps, 20.0, n=100, seed=7)
    # averaging 100 samplings should land within 1 dB of 20 + 10*log10(100)
    assert abs(empirical_snr_db(clean.values, avg.values) - 40.0) < 1.0


def test_average_samplings_rejects_bad_n():
    img = np.zeros((4, 4))
    ps = forward.gen_patterns(4, 4, 4, "bernoulli01", seed=8)
    with pytest.raises(ValueError):
        forward.average_samplings(img, ps, 20.0, n=0, seed=0)


def test_spim_round_trip(tmp_path):
    img = np.random.default_rng(11).random((8, 8))
    ps = forward.gen_patterns(16, 8, 8, "rademacher", seed=123)
    m = forward.add_noise(forward.measure(img, ps), 40.0, noise_seed=9)
    path = tmp_path / "m.spim"
    forward.save_measurement(m, path)
    back = forward.load_measurement(path)
    assert np.array_equal(back.values, m.values)
    assert back.pattern_kind == "rademacher"
    assert back.pattern_seed == 123 and back.noise_seed == 9
    assert back.snr_db == 40.0 and back.samplings == 1
    regen = forward.regenerate_patterns(back)
    assert np.array_equal(regen.rows, ps.rows)


def test_spim_rejects_garbage(tmp_path):
    path = tmp_path / "bad.spim"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError):
        forward.load_measurement(path)
