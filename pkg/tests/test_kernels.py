import numpy as np
import pytest

import geosup
from geosup import _kernels

BACKENDS = _kernels.available_backends()


def test_active_backend_reported():
    assert geosup.BACKEND in BACKENDS
    assert _kernels.BACKEND == geosup.BACKEND


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled backend not built")
class TestAgreement:
    def test_bilinear(self, rng):
        img = rng.uniform(size=(13, 17, 3))
        x = np.concatenate([rng.uniform(-2, 18, 500), [0, 16, 16 + 1e-12, -1e-12, 16.5, np.nan, np.inf]])
        y = np.concatenate([rng.uniform(-2, 14, 500), [0, 12, 12, 0, 3, 1, 1]])
        py = BACKENDS["python"].bilinear_sample(img, x, y)
        cy = BACKENDS["cython"].bilinear_sample(img, x, y)
        for a, b in zip(py, cy):
            np.testing.assert_allclose(b, a, rtol=0, atol=1e-14)

    def test_bilinear_single_row_and_column(self, rng):
        for shape in [(1, 6, 1), (6, 1, 1), (1, 1, 2)]:
            img = rng.uniform(size=shape)
            x = rng.uniform(0, shape[1] - 1, 20)
            y = rng.uniform(0, shape[0] - 1, 20)
            py = BACKENDS["python"].bilinear_sample(img, x, y)
            cy = BACKENDS["cython"].bilinear_sample(img, x, y)
            for a, b in zip(py, cy):
                np.testing.assert_allclose(b, a, rtol=0, atol=1e-14)

    def test_smoothness(self, rng):
        for shape in [(2, 2), (9, 13), (1, 5)]:
            d = rng.uniform(size=shape)
            wshape = (max(shape[0] - 1, 0), max(shape[1] - 1, 0))
            wx, wy = rng.uniform(size=wshape), rng.uniform(size=wshape)
            lp, gp = BACKENDS["python"].smoothness(d, wx, wy)
            lc, gc = BACKENDS["cython"].smoothness(d, wx, wy)
            assert lc == pytest.approx(lp, rel=1e-13, abs=1e-15)
            np.testing.assert_allclose(gc, gp, rtol=0, atol=1e-14)


def test_border_round_off_snaps_onto_image():
    img = np.arange(12.0).reshape(3, 4, 1)
    for mod in BACKENDS.values():
        vals, _, _, valid = mod.bilinear_sample(img, np.array([3 + 1e-12, -1e-12, 3 + 1e-6]), np.array([2.0, 0.0, 0.0]))
        np.testing.assert_array_equal(valid, [True, True, False])
        np.testing.assert_allclose(vals[:2, 0], [11.0, 0.0])
