import numpy as np
import pytest

from geosup.camera import CameraIntrinsics


def central_difference(fn, x, rel_step=1e-5):
    """Central finite differences of scalar ``fn`` at ``x``, one coordinate at a time.

    Step per coordinate is ``rel_step * max(1, |x_i|)``.
    """
    x = np.array(x, dtype=np.float64)
    flat = x.ravel()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        h = rel_step * max(1.0, abs(flat[i]))
        orig = flat[i]
        flat[i] = orig + h
        fp = fn(x)
        flat[i] = orig - h
        fm = fn(x)
        flat[i] = orig
        grad[i] = (fp - fm) / (2 * h)
    return grad.reshape(x.shape)


def max_relative_error(analytic, numeric):
    """Max abs difference scaled by the largest numeric gradient entry."""
    a = np.asarray(analytic).ravel()
    n = np.asarray(numeric).ravel()
    scale = max(np.max(np.abs(n)), 1e-300)
    return float(np.max(np.abs(a - n)) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_intr():
    return CameraIntrinsics(1.0, 1.0, 0.0, 0.0, 8, 8)


@pytest.fixture
def small_intr():
    return CameraIntrinsics(40.0, 42.0, 15.5, 11.0, 32, 24)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record and print the outcome of one acceptance criterion.

    Usage: ``criterion(n, ok, detail)``; the line is printed immediately and
    repeated in the terminal summary so it shows up without ``-s``.
    """
    results = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        results[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
