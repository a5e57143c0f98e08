import numpy as np
import pytest
from conftest import central_difference, max_relative_error

from geosup.camera import CameraIntrinsics
from geosup.errors import ConfigurationError, InvalidInputError, NumericalError
from geosup.refiner import (
    AdamState,
    Objective,
    RefinementConfig,
    StereoInputs,
    adam_step,
    plane_projection_variance,
    refine,
)
from geosup.semantics import SemanticMask
from geosup.synthetic import add_depth_noise, render_depth, render_stereo_pair, two_plane_scene

INTR = CameraIntrinsics(40.0, 40.0, 23.5, 15.5, 48, 32)


@pytest.fixture(scope="module")
def scene_data():
    scene = two_plane_scene(INTR, baseline=0.54)
    depth, mask, _ = render_depth(scene)
    left, right, _ = render_stereo_pair(scene)
    noisy = add_depth_noise(depth, sigma=0.05, seed=1)
    init = np.clip(1.0 / noisy, 1e-3, 10.0)
    return scene, depth, mask, left, right, init


def quick(**kw):
    base = dict(max_iterations=25)
    base.update(kw)
    return RefinementConfig(**base)


class TestAdam:
    def test_hand_first_step(self):
        cfg = RefinementConfig(step_size=0.1)
        update, state = adam_step(np.ones(3), AdamState.zeros(3), cfg)
        np.testing.assert_allclose(update, -0.1 / (1 + 1e-8), rtol=1e-15)
        assert state.t == 1

    def test_zero_gradient(self):
        update, _ = adam_step(np.zeros((2, 2)), AdamState.zeros((2, 2)), RefinementConfig())
        assert np.all(update == 0)

    def test_constant_gradient_step_is_lr(self):
        cfg = RefinementConfig(step_size=0.01)
        state = AdamState.zeros(2)
        g = np.array([3.0, -0.5])
        for _ in range(50):
            update, state = adam_step(g, state, cfg)
            np.testing.assert_allclose(update, -0.01 * g / (np.abs(g) + 1e-8), rtol=1e-12)

    def test_nan_gradient_names_term(self):
        with pytest.raises(NumericalError) as exc:
            adam_step(np.array([1.0, np.nan]), AdamState.zeros(2), RefinementConfig(), term="vp")
        assert exc.value.term == "vp"

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            adam_step(np.ones(3), AdamState.zeros(2), RefinementConfig())


class TestConfig:
    def test_text_round_trip(self):
        cfg = RefinementConfig(w_hp=0.25, categories=("flat",), vp_mode="exact", per_component=False)
        assert RefinementConfig.from_text(cfg.to_text()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="unknown key"):
            RefinementConfig.from_text("bogus = 1\n")

    def test_bad_value(self):
        with pytest.raises(ConfigurationError, match="w_hp"):
            RefinementConfig.from_text("w_hp = abc\n")

    @pytest.mark.parametrize(
        "kw",
        [
            {"w_hp": -1},
            {"beta1": 1.0},
            {"d_min": 0},
            {"step_size": 0},
            {"patience": 0},
            {"vp_mode": "dense"},
            {"direction_count": 0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            RefinementConfig(**kw)


class TestObjective:
    def test_gradient_finite_difference_smooth_terms(self):
        intr = CameraIntrinsics(12.0, 12.0, 7.5, 5.5, 16, 12)
        scene = two_plane_scene(intr, wall_distance=6.0)
        depth, mask, _ = render_depth(scene)
        rng = np.random.default_rng(2)
        rho = 1.0 / depth * rng.uniform(0.9, 1.1, depth.shape)
        cfg = RefinementConfig(photometric=0.0, smoothness=0.1, min_region=4)
        obj = Objective(None, scene.gravity, mask, intr, cfg)
        _, _, grad = obj(rho)
        fd = central_difference(lambda r: obj(r)[0], rho, rel_step=1e-7)
        assert max_relative_error(grad, fd) < 1e-4

    def test_stereo_chain_rule(self, scene_data):
        scene, _, mask, left, right, init = scene_data
        cfg = RefinementConfig(smoothness=0.0, w_hp=0.0, w_vp=0.0)
        obj = Objective(StereoInputs(left, right, 0.54), None, None, INTR, cfg)
        _, _, grad = obj(init)
        rng = np.random.default_rng(0)
        for _ in range(10):
            i, j = rng.integers(0, INTR.height), rng.integers(0, INTR.width)
            h = 1e-7
            up, down = init.copy(), init.copy()
            up[i, j] += h
            down[i, j] -= h
            fd = (obj(up)[0] - obj(down)[0]) / (2 * h)
            assert fd == pytest.approx(grad[i, j], rel=1e-4, abs=1e-9)

    def test_missing_gravity(self, scene_data):
        _, _, mask, left, right, _ = scene_data
        with pytest.raises(ConfigurationError, match="gravity"):
            Objective(StereoInputs(left, right, 0.54), None, mask, INTR, RefinementConfig())
        with pytest.raises(ConfigurationError, match="mask"):
            Objective(StereoInputs(left, right, 0.54), [0, 1, 0], None, INTR, RefinementConfig())

    def test_photometric_without_images(self):
        with pytest.raises(ConfigurationError):
            Objective(None, None, None, INTR, RefinementConfig(w_hp=0, w_vp=0))


class TestRefine:
    def test_all_weights_zero_is_identity(self, scene_data):
        _, _, mask, left, right, init = scene_data
        cfg = RefinementConfig(photometric=0, smoothness=0, w_hp=0, w_vp=0)
        out, trace = refine(init, StereoInputs(left, right, 0.54), None, None, INTR, cfg)
        np.testing.assert_array_equal(out, init)
        assert trace.reason == "no_active_terms"

    def test_zero_iterations_is_identity(self, scene_data):
        scene, _, mask, left, right, init = scene_data
        out, trace = refine(init, StereoInputs(left, right, 0.54), scene.gravity, mask, INTR, quick(max_iterations=0))
        np.testing.assert_array_equal(out, init)
        assert len(trace) == 0

    def test_monotone_and_bounded(self, scene_data):
        scene, _, mask, left, right, init = scene_data
        cfg = quick(max_iterations=40)
        out, trace = refine(init, StereoInputs(left, right, 0.54), scene.gravity, mask, INTR, cfg)
        totals = np.array(trace.totals)
        assert np.all(np.diff(totals) <= 0)
        assert totals[-1] < totals[0]
        assert out.min() >= cfg.d_min and out.max() <= cfg.d_max

    def test_deterministic(self, scene_data):
        scene, _, mask, left, right, init = scene_data
        a, ta = refine(init, StereoInputs(left, right, 0.54), scene.gravity, mask, INTR, quick())
        b, tb = refine(init, StereoInputs(left, right, 0.54), scene.gravity, mask, INTR, quick())
        np.testing.assert_array_equal(a, b)
        assert ta.to_csv() == tb.to_csv()

    def test_sigl_off_ignores_gravity_and_mask(self, scene_data):
        scene, _, mask, left, right, init = scene_data
        cfg = quick(w_hp=0.0, w_vp=0.0)
        a, _ = refine(init, StereoInputs(left, right, 0.54), scene.gravity, mask, INTR, cfg)
        other = SemanticMask.uniform(INTR.shape, None)
        b, _ = refine(init, StereoInputs(left, right, 0.54), [1.0, 0.0, 0.0], other, INTR, cfg)
        c, _ = refine(init, StereoInputs(left, right, 0.54), None, None, INTR, cfg)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a, c)

    def test_plane_only_leaves_ungated_pixels(self, scene_data):
        scene, _, mask, _, _, init = scene_data
        cfg = quick(photometric=0.0, smoothness=0.0, categories=("flat",))
        out, _ = refine(init, None, scene.gravity, mask, INTR, cfg)
        road = mask.category_mask("flat")
        np.testing.assert_array_equal(out[~road], init[~road])
        assert np.any(out[road] != init[road])

    def test_plane_terms_reduce_variance(self, scene_data):
        scene, _, mask, _, _, init = scene_data
        cfg = quick(photometric=0.0, smoothness=0.0, max_iterations=100, step_size=1e-3)
        out, _ = refine(init, None, scene.gravity, mask, INTR, cfg)
        before = plane_projection_variance(1 / init, INTR, scene.gravity, mask)
        after = plane_projection_variance(1 / out, INTR, scene.gravity, mask)
        assert after < 0.5 * before

    def test_trace_csv(self, scene_data):
        scene, _, mask, left, right, init = scene_data
        _, trace = refine(init, StereoInputs(left, right, 0.54), scene.gravity, mask, INTR, quick(max_iterations=3))
        lines = trace.to_csv().splitlines()
        assert lines[0] == "iteration,total,photometric,smoothness,hp,vp,step_scale"
        assert len(lines) == 2 + len(trace)

    def test_bad_initialisation(self, scene_data):
        scene, _, mask, left, right, init = scene_data
        inputs = StereoInputs(left, right, 0.54)
        bad = init.copy()
        bad[0, 0] = np.nan
        with pytest.raises(InvalidInputError):
            refine(bad, inputs, scene.gravity, mask, INTR)
        with pytest.raises(InvalidInputError):
            refine(init * 0 + 20.0, inputs, scene.gravity, mask, INTR)
        with pytest.raises(InvalidInputError):
            refine(init[:-1], inputs, scene.gravity, mask, INTR)


def test_shipped_default_config_matches_code():
    from importlib import resources

    path = resources.files("geosup").joinpath("data/refine_default.txt")
    assert RefinementConfig.from_text(path.read_text(encoding="utf-8")) == RefinementConfig()
