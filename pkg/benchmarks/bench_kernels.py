"""Time the hot kernels under every importable backend.

Run from the repository root after an editable install::

    python3 benchmarks/bench_kernels.py [--height 128 --width 256 --repeat 20]

Prints one row per (kernel, backend) with the best-of-``repeat`` time and the
speed-up over the pure-Python backend, and checks that the backends agree.
``--refine`` also times a full stereo refinement in a fresh interpreter per
backend (the backend is fixed at import, via ``GEOSUP_PURE_PYTHON``).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from geosup._kernels import available_backends


def make_inputs(h, w, seed=0):
    rng = np.random.default_rng(seed)
    img = rng.uniform(size=(h, w, 3))
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    x = (xs + rng.uniform(-3, 3, (h, w))).ravel()
    y = (ys + rng.uniform(-0.5, 0.5, (h, w))).ravel()
    d = rng.uniform(size=(h, w))
    wx = rng.uniform(size=(h - 1, w - 1))
    wy = rng.uniform(size=(h - 1, w - 1))
    return img, x, y, d, wx, wy


REFINE_SNIPPET = """
import time
from geosup import BACKEND
from geosup.camera import CameraIntrinsics
from geosup.refiner import RefinementConfig, StereoInputs, refine
from geosup.synthetic import add_depth_noise, render_depth, render_stereo_pair, two_plane_scene
intr = CameraIntrinsics(150.0, 150.0, 128.0, 64.0, 256, 128)
scene = two_plane_scene(intr)
depth, mask, _ = render_depth(scene)
left, right, _ = render_stereo_pair(scene)
init = 1.0 / add_depth_noise(depth, 0.05, seed=1)
cfg = RefinementConfig(max_iterations=100, patience=1000)
start = time.perf_counter()
refine(init, StereoInputs(left, right, 0.54), scene.gravity, mask, intr, cfg)
print(BACKEND, time.perf_counter() - start)
"""


def time_refinement(backends):
    print(f"{'refine (100 it)':<16} {'backend':<8} {'s':>9} {'speed-up':>9}")
    base = None
    for backend in backends:
        env = dict(os.environ, GEOSUP_PURE_PYTHON="1" if backend == "python" else "0")
        out = subprocess.run([sys.executable, "-c", REFINE_SNIPPET], env=env, capture_output=True, text=True, check=True)
        name, seconds = out.stdout.split()
        t = float(seconds)
        base = base or t
        print(f"{'':<16} {name:<8} {t:9.2f} {base / t:8.1f}x")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--height", type=int, default=128)
    parser.add_argument("--width", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--refine", action="store_true", help="also time a 256x128 stereo refinement")
    args = parser.parse_args(argv)

    img, x, y, d, wx, wy = make_inputs(args.height, args.width)
    backends = available_backends()
    cases = {
        "bilinear_sample": lambda mod: mod.bilinear_sample(img, x, y),
        "smoothness": lambda mod: mod.smoothness(d, wx, wy),
    }
    print(f"image {args.height}x{args.width}, best of {args.repeat}; backends: {', '.join(backends)}")
    print(f"{'kernel':<16} {'backend':<8} {'ms':>9} {'speed-up':>9}")
    for name, call in cases.items():
        reference = call(backends["python"])
        base = None
        for backend, mod in backends.items():
            result = call(mod)
            for a, b in zip(reference, result):
                np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12)
            t = min(timeit.repeat(lambda: call(mod), number=1, repeat=args.repeat))
            base = base or t
            print(f"{name:<16} {backend:<8} {t * 1e3:9.3f} {base / t:8.1f}x")
    if args.refine:
        time_refinement(backends)


if __name__ == "__main__":
    main()
