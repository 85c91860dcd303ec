import numpy as np
import pytest

from spilab import transforms
from spilab._kernels import _ops_py

from oracles import conv_circular_direct, prox_l1_grid_search

try:
    from spilab._kernels import _ops as _ops_cy
except ImportError:
    _ops_cy = None

BACKENDS = [_ops_py] + ([_ops_cy] if _ops_cy is not None else [])


# ---------------------------------------------------------------- DCT

def test_dct_constant_image_concentrates_at_dc():
    c = 0.7
    coeffs = transforms.dct2_forward(np.full((12, 9), c))
    assert abs(coeffs[0, 0] - c * np.sqrt(12 * 9)) < 1e-10
    off = coeffs.copy()
    off[0, 0] = 0.0
    assert np.abs(off).max() < 1e-12


def test_dct_round_trip_100_random_images():
    rng = np.random.default_rng(42)
    for _ in range(100):
        x = rng.standard_normal((16, 16))
        back = transforms.dct2_inverse(transforms.dct2_forward(x))
        assert np.abs(back - x).max() < 1e-12


def test_dct_parseval():
    rng = np.random.default_rng(43)
    for _ in range(20):
        x = rng.standard_normal((11, 23))
        assert abs(np.linalg.norm(transforms.dct2_forward(x)) -
                   np.linalg.norm(x)) < 1e-10


def test_dct_inverse_of_dc_delta_is_constant():
    coeffs = np.zeros((8, 8))
    coeffs[0, 0] = np.sqrt(64.0)
    assert np.abs(transforms.dct2_inverse(coeffs) - 1.0).max() < 1e-12
    assert np.abs(transforms.dct2_inverse(np.zeros((8, 8)))).max() == 0.0


# ---------------------------------------------------------------- TV pair

def test_gradient_of_constant_is_zero():
    g = transforms.gradient(np.full((6, 7), 3.2))
    assert np.abs(g).max() < 1e-14


def test_gradient_hand_case():
    g = transforms.gradient(np.array([[0.0, 1.0, 1.0, 0.0]]))
    assert np.array_equal(g[0], [[1.0, 0.0, -1.0, 0.0]])
    assert np.array_equal(g[1], [[0.0, 0.0, 0.0, 0.0]])


def test_gradient_divergence_adjoint_100_pairs():
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = rng.standard_normal((10, 13))
        p = rng.standard_normal((2, 10, 13))
        lhs = float(np.sum(transforms.gradient(x) * p))
        rhs = float(np.sum(x * transforms.divergence(p)))
        assert abs(lhs - rhs) < 1e-10


def test_divergence_trivial_cases():
    assert np.abs(transforms.divergence(np.zeros((2, 5, 5)))).max() == 0.0
    g = transforms.gradient(np.full((5, 5), 2.0))
    assert np.abs(transforms.divergence(g)).max() < 1e-14


def test_divergence_shape_check():
    with pytest.raises(ValueError):
        transforms.divergence(np.zeros((3, 4, 4)))


def test_gradient_gram_matches_composition():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((9, 14))
    composed = transforms.divergence(transforms.gradient(x))
    assert np.abs(transforms.gradient_gram(x) - composed).max() < 1e-12


# ---------------------------------------------------------------- convolution

def test_conv_identity_kernel():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((8, 8))
    k = np.zeros((3, 3))
    k[0, 0] = 1.0
    assert np.abs(transforms.conv_circular(x, k) - x).max() < 1e-12


def test_conv_constant_mass():
    out = transforms.conv_circular(np.full((10, 10), 0.3), np.ones((4, 4)))
    assert np.abs(out - 0.3 * 16).max() < 1e-10


def test_conv_matches_direct_oracle_100_cases():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal((8, 8))
        k = rng.standard_normal((3, 3))
        err = np.abs(transforms.conv_circular(x, k) -
                     conv_circular_direct(x, k)).max()
        worst = max(worst, err)
    assert worst < 1e-10


def test_conv_linearity():
    rng = np.random.default_rng(11)
    u, w = rng.standard_normal((2, 12, 12))
    k = rng.standard_normal((5, 5))
    a, b = 1.7, -0.4
    lhs = transforms.conv_circular(a * u + b * w, k)
    rhs = a * transforms.conv_circular(u, k) + b * transforms.conv_circular(w, k)
    assert np.abs(lhs - rhs).max() < 1e-10


def test_conv_translation_covariance():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((9, 11))
    k = rng.standard_normal((3, 3))
    for shift in [(1, 0), (0, 1), (4, 7), (-2, 3)]:
        lhs = transforms.conv_circular(np.roll(x, shift, axis=(0, 1)), k)
        rhs = np.roll(transforms.conv_circular(x, k), shift, axis=(0, 1))
        assert np.abs(lhs - rhs).max() < 1e-10


def test_conv_rejects_oversized_kernel():
    with pytest.raises(ValueError):
        transforms.conv_circular(np.zeros((4, 4)), np.ones((5, 5)))


# ---------------------------------------------------------------- prox

def test_soft_threshold_analytic_cases():
    assert transforms.soft_threshold(np.array([2.0]), 0.5)[0] == 1.5
    assert transforms.soft_threshold(np.array([-0.3]), 0.5)[0] == 0.0
    v = np.random.default_rng(13).standard_normal((4, 4))
    assert np.array_equal(transforms.soft_threshold(v, 0.0), v)


def test_soft_threshold_rejects_negative_tau():
    with pytest.raises(ValueError):
        transforms.soft_threshold(np.zeros(3), -0.1)


def test_soft_threshold_is_l1_prox_by_grid_search():
    rng = np.random.default_rng(14)
    for _ in range(25):
        v = float(rng.uniform(-3, 3))
        tau = float(rng.uniform(0, 2))
        got = transforms.soft_threshold(np.array([v]), tau)[0]
        assert abs(got - prox_l1_grid_search(v, tau)) < 1e-4
        # prox optimality: no grid point does better than the prox value
        zs = np.linspace(v - 4, v + 4, 5001)
        best = np.min(tau * np.abs(zs) + 0.5 * (zs - v) ** 2)
        assert tau * abs(got) + 0.5 * (got - v) ** 2 <= best + 1e-6


# ---------------------------------------------------------------- backends

@pytest.mark.parametrize("ops", BACKENDS, ids=lambda m: m.__name__.split(".")[-1])
def test_backend_consistency(ops):
    rng = np.random.default_rng(15)
    x = rng.standard_normal((7, 10))
    gx, gy = ops.grad2(x)
    gxr, gyr = _ops_py.grad2(x)
    assert np.array_equal(gx, gxr) and np.array_equal(gy, gyr)
    assert np.allclose(ops.div2(gx, gy), _ops_py.div2(gxr, gyr), atol=1e-14)
    assert np.allclose(ops.gram_tv(x), _ops_py.gram_tv(x), atol=1e-14)
    assert np.array_equal(ops.soft_threshold(x, 0.3), _ops_py.soft_threshold(x, 0.3))
