import numpy as np
import pytest
from conftest import central_difference, max_relative_error
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geosup.errors import InvalidInputError
from geosup.regularizers import edge_weights, loss_smoothness, smoothness_grad


def naive_smoothness(d, img, a):
    """Direct double loop over the interior grid."""
    img = np.asarray(img, float)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w = d.shape
    total = 0.0
    for i in range(h - 1):
        for j in range(w - 1):
            ix = np.mean(np.abs(img[i, j + 1] - img[i, j]))
            iy = np.mean(np.abs(img[i + 1, j] - img[i, j]))
            total += abs(d[i, j + 1] - d[i, j]) * np.exp(-a * ix) + abs(d[i + 1, j] - d[i, j]) * np.exp(-a * iy)
    return total / ((h - 1) * (w - 1))


def test_constant_is_zero(rng):
    assert loss_smoothness(np.full((6, 7), 3.3), rng.uniform(size=(6, 7))) == 0.0


def test_ramp_x():
    ys, xs = np.mgrid[0:6, 0:9].astype(float)
    assert loss_smoothness(xs, np.zeros((6, 9))) == pytest.approx(1.0)


def test_ramp_x_plus_y():
    ys, xs = np.mgrid[0:6, 0:9].astype(float)
    assert loss_smoothness(xs + ys, np.zeros((6, 9))) == pytest.approx(2.0)


def test_strong_edges_suppress():
    ys, xs = np.mgrid[0:6, 0:9].astype(float)
    img = ((xs + ys) % 2) * 100.0  # checkerboard: every neighbour differs by 100
    assert loss_smoothness(xs + ys, img, edge_weight=1.0) < 1e-40


def test_matches_naive_loop(rng):
    for shape in [(2, 2), (5, 8), (9, 4)]:
        d = rng.uniform(0, 2, shape)
        img = rng.uniform(0, 1, shape + (3,))
        assert loss_smoothness(d, img, 2.5) == pytest.approx(naive_smoothness(d, img, 2.5), rel=1e-12)


def test_degenerate_shapes():
    assert loss_smoothness(np.ones((1, 5)), np.ones((1, 5))) == 0.0
    loss, grad = smoothness_grad(np.ones((5, 1)), np.ones((5, 1)))
    assert loss == 0.0 and grad.shape == (5, 1)


def test_edge_weights_range(rng):
    wx, wy = edge_weights(rng.uniform(size=(5, 6, 3)), 3.0)
    assert wx.shape == (4, 5) and wy.shape == (4, 5)
    assert np.all((wx > 0) & (wx <= 1)) and np.all((wy > 0) & (wy <= 1))


def test_gradient_finite_difference(rng):
    d = rng.uniform(0, 1, (7, 9))
    img = rng.uniform(size=(7, 9))
    _, grad = smoothness_grad(d, img, 1.5)
    fd = central_difference(lambda x: loss_smoothness(x, img, 1.5), d, rel_step=1e-8)
    assert max_relative_error(grad, fd) < 1e-5


def test_mismatch():
    with pytest.raises(InvalidInputError):
        loss_smoothness(np.ones((4, 4)), np.ones((4, 5)))
    with pytest.raises(InvalidInputError):
        loss_smoothness(np.ones(4), np.ones(4))


@settings(max_examples=100, deadline=None)
@given(
    d=arrays(np.float64, st.tuples(st.integers(2, 8), st.integers(2, 8)), elements=st.floats(-10, 10)),
    shift=st.floats(-100, 100),
    scale=st.floats(0.01, 100),
)
def test_property_shift_invariant_scale_linear(d, shift, scale):
    img = np.zeros(d.shape)
    base = loss_smoothness(d, img)
    assert base >= 0
    assert loss_smoothness(d + shift, img) == pytest.approx(base, rel=1e-9, abs=1e-9)
    assert loss_smoothness(scale * d, img) == pytest.approx(scale * base, rel=1e-9, abs=1e-12)
