import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geosup.camera import CameraIntrinsics, back_project, back_project_map, pixel_ray, project
from geosup.errors import BehindCameraError, InvalidInputError, ValidationError


def test_k_times_k_inverse_is_identity(small_intr):
    np.testing.assert_allclose(small_intr.K @ small_intr.K_inv, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(small_intr.K_inv, np.linalg.inv(small_intr.K), atol=1e-12)


@pytest.mark.parametrize("fx, fy", [(0.0, 1.0), (1.0, -2.0)])
def test_non_positive_focal_rejected(fx, fy):
    with pytest.raises(ValidationError):
        CameraIntrinsics(fx, fy, 0.0, 0.0, 4, 4)


def test_principal_point_maps_to_optical_axis(small_intr):
    p = back_project((small_intr.cx, small_intr.cy), 5.0, small_intr)
    np.testing.assert_array_equal(p, [0.0, 0.0, 5.0])


def test_hand_back_projection(unit_intr):
    # K = I: X = [x, y, 1] Z
    np.testing.assert_array_equal(back_project((2, 3), 4.0, unit_intr), [8.0, 12.0, 4.0])


def test_linear_in_depth(small_intr):
    a = back_project((3, 7), 1.0, small_intr)
    b = back_project((3, 7), 2.0, small_intr)
    np.testing.assert_array_equal(b, 2 * a)


def test_third_coordinate_is_depth_exactly(small_intr):
    for z in (0.3, 1.7, 79.9):
        assert back_project((5.5, 2.25), z, small_intr)[2] == z


@pytest.mark.parametrize("z", [0.0, -1.0, np.nan])
def test_invalid_depth(small_intr, z):
    with pytest.raises(InvalidInputError):
        back_project((1, 1), z, small_intr)


def test_pixel_outside_image(small_intr):
    with pytest.raises(InvalidInputError):
        back_project((small_intr.width, 0), 1.0, small_intr)


def test_project_examples(small_intr, unit_intr):
    np.testing.assert_allclose(project([0, 0, 5], small_intr), [small_intr.cx, small_intr.cy])
    np.testing.assert_allclose(project([8, 12, 4], unit_intr), [2.0, 3.0])


def test_project_behind_camera(small_intr):
    with pytest.raises(BehindCameraError):
        project([0.0, 0.0, -1.0], small_intr)
    with pytest.raises(BehindCameraError):
        project([0.0, 0.0, 0.0], small_intr)


def test_round_trip_grid(small_intr):
    xs = np.linspace(0, small_intr.width - 1, 16)
    ys = np.linspace(0, small_intr.height - 1, 16)
    zs = np.linspace(0.5, 80.0, 16)
    for x in xs:
        for y in ys:
            for z in zs[::5]:
                uv = project(back_project((x, y), z, small_intr), small_intr)
                assert np.max(np.abs(uv - [x, y])) < 1e-9


@settings(max_examples=200, deadline=None)
@given(
    x=st.floats(0, 31),
    y=st.floats(0, 23),
    z=st.floats(1e-3, 1e3),
    c=st.floats(1e-3, 1e3),
)
def test_homogeneity_and_round_trip(x, y, z, c):
    intr = CameraIntrinsics(40.0, 42.0, 15.5, 11.0, 32, 24)
    p = back_project((x, y), z, intr)
    q = back_project((x, y), c * z, intr)
    np.testing.assert_allclose(q, c * p, rtol=1e-12, atol=0)
    np.testing.assert_allclose(project(p, intr), [x, y], atol=1e-9)


def test_back_project_map_constant_depth_is_fronto_parallel(small_intr):
    depth = np.full(small_intr.shape, 3.5)
    bp = back_project_map(depth, small_intr)
    assert len(bp) == small_intr.width * small_intr.height
    assert np.all(bp.points[:, 2] == 3.5)
    assert bp.skipped == 0


def test_back_project_map_empty_mask(small_intr):
    bp = back_project_map(np.ones(small_intr.shape), small_intr, np.zeros(small_intr.shape, bool))
    assert bp.points.shape == (0, 3)


def test_back_project_map_hand_2x2():
    intr = CameraIntrinsics(1.0, 1.0, 0.0, 0.0, 2, 2)
    depth = np.array([[1.0, 2.0], [3.0, 4.0]])
    bp = back_project_map(depth, intr)
    # row-major: (x,y) = (0,0), (1,0), (0,1), (1,1)
    expected = [[0, 0, 1], [2, 0, 2], [0, 3, 3], [4, 4, 4]]
    np.testing.assert_array_equal(bp.points, expected)
    np.testing.assert_array_equal(bp.pixels, [[0, 0], [0, 1], [1, 0], [1, 1]])


def test_back_project_map_skips_invalid(small_intr, rng):
    depth = rng.uniform(1, 5, small_intr.shape)
    depth[0, 0] = 0.0
    depth[3, 4] = np.nan
    depth[5, 5] = -2.0
    bp = back_project_map(depth, small_intr)
    assert bp.skipped == 3
    assert len(bp) == depth.size - 3
    again = back_project_map(depth, small_intr)
    np.testing.assert_array_equal(bp.points, again.points)


def test_pixel_ray_third_component_one(small_intr):
    r = pixel_ray(np.arange(5), np.arange(5), small_intr)
    assert np.all(r[:, 2] == 1.0)
