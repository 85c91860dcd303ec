import math

import numpy as np
import pytest

from spilab.metrics import MetricsRecord, psnr, rmse


def test_rmse_identity():
    x = np.random.default_rng(0).random((8, 8))
    assert rmse(x, x) == 0.0


def test_rmse_unit_gap():
    assert rmse(np.zeros((4, 4)), np.ones((4, 4))) == 1.0


def test_rmse_constant_offset():
    x = np.random.default_rng(1).random((5, 9))
    assert abs(rmse(x, x + 0.1) - 0.1) < 1e-12


def test_rmse_symmetric():
    rng = np.random.default_rng(2)
    a, b = rng.random((6, 6)), rng.random((6, 6))
    assert rmse(a, b) == rmse(b, a)


def test_psnr_identity_is_inf():
    x = np.random.default_rng(3).random((8, 8))
    assert psnr(x, x) == math.inf


def test_psnr_zero_db():
    assert abs(psnr(np.zeros((4, 4)), np.ones((4, 4)))) < 1e-12


def test_psnr_constant_offset_20db():
    x = np.random.default_rng(4).random((7, 7)) * 0.5
    assert abs(psnr(x, x + 0.1) - 20.0) < 1e-10


def test_psnr_rmse_consistency():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b = rng.random((6, 10)), rng.random((6, 10))
        r = rmse(a, b)
        assert abs(psnr(a, b) - (-20.0 * math.log10(r))) < 1e-10


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        rmse(np.zeros((2, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        psnr(np.zeros((2, 2)), np.zeros((2, 3)))


def test_metrics_record_validation():
    rec = MetricsRecord(algorithm_id="TV", compression_ratio=0.25, snr_db=60.0,
                        psnr_db=30.0, rmse=0.03, image_id="img", wall_time=1.0,
                        seed=7)
    assert rec.converged
    with pytest.raises(ValueError):
        MetricsRecord(algorithm_id="BOGUS", compression_ratio=0.25, snr_db=None,
                      psnr_db=1.0, rmse=0.1, image_id="i", wall_time=0.0, seed=0)
    with pytest.raises(ValueError):
        MetricsRecord(algorithm_id="TV", compression_ratio=0.0, snr_db=None,
                      psnr_db=1.0, rmse=0.1, image_id="i", wall_time=0.0, seed=0)
