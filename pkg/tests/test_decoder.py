import math

import numpy as np
import pytest

from reference import hough_brute_force, lattice_disk_count
from topdown_pose.decoder import aggregate, decode_crop, localize, rescore
from topdown_pose.errors import InvalidInputError
from topdown_pose.geometry import Box, CropTransform, make_crop_transform
from topdown_pose.oracle import oracle_tensors
from topdown_pose.poses import NUM_KEYPOINTS, Pose

UNIT = CropTransform(Box(0.0, 0.0, 257.0, 353.0))
BACKENDS = ["numba", "numpy"]


def pose_at(points, image_id=1, area=5000.0):
    kp = np.zeros((NUM_KEYPOINTS, 3))
    for k, (x, y) in enumerate(points):
        kp[k] = (x, y, 2)
    return Pose(kp, area=area, image_id=image_id)


def grid_pose():
    """All 17 keypoints on grid points, disks (R=25) inside the 257x353 grid."""
    pts = [(40 + 44 * (k % 5), 40 + 65 * (k // 5)) for k in range(NUM_KEYPOINTS)]
    return pose_at(pts)


@pytest.mark.parametrize("backend", BACKENDS)
def test_matches_brute_force_gather(backend):
    rng = np.random.default_rng(11)
    for _ in range(5):
        heat = rng.random((3, 9, 11)) * (rng.random((3, 9, 11)) < 0.5)
        off = rng.normal(0, 3, (6, 9, 11))  # some votes leave the grid
        np.testing.assert_allclose(
            aggregate(heat, off, 2.0, backend=backend), hough_brute_force(heat, off, 2.0), rtol=0, atol=1e-13
        )


def test_backends_agree_on_large_random_stack():
    rng = np.random.default_rng(5)
    heat = rng.random((17, 60, 50))
    off = rng.normal(0, 10, (34, 60, 50))
    np.testing.assert_allclose(
        aggregate(heat, off, 25.0, backend="numba"), aggregate(heat, off, 25.0, backend="numpy"), atol=1e-15
    )


@pytest.mark.parametrize("backend", BACKENDS)
def test_delta_property(backend):
    heat, off = oracle_tensors(pose_at([(100, 150)]), UNIT, 5.0)
    f = aggregate(heat, off, 5.0, backend=backend)
    expected = lattice_disk_count(5) / (25 * math.pi)
    assert f[0, 150, 100] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.0313, abs=1e-4)
    assert np.count_nonzero(f) == 1


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_heatmaps_give_zero_activation(backend):
    off = np.random.default_rng(0).normal(size=(4, 5, 6))
    assert not aggregate(np.zeros((2, 5, 6)), off, 3.0, backend=backend).any()


@pytest.mark.parametrize("backend", BACKENDS)
def test_mass_conservation_in_grid(backend):
    rng = np.random.default_rng(2)
    h, w = 30, 20
    heat = rng.random((4, h, w))
    rows, cols = np.mgrid[0:h, 0:w]
    # targets drawn inside [0, w-1] x [0, h-1] so no splat weight leaves the grid
    tx = rng.uniform(0, w - 1, (4, h, w))
    ty = rng.uniform(0, h - 1, (4, h, w))
    off = np.empty((8, h, w))
    off[0::2] = tx - cols
    off[1::2] = ty - rows
    f = aggregate(heat, off, 3.0, backend=backend)
    np.testing.assert_allclose(f.sum(axis=(1, 2)), heat.sum(axis=(1, 2)) / (9 * math.pi), rtol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_votes_leaving_grid_are_dropped(backend):
    heat = np.zeros((1, 4, 4))
    heat[0, 1, 1] = 1.0
    off = np.zeros((2, 4, 4))
    off[0, 1, 1] = -1.5  # lands at x = -0.5: half the weight is off-grid
    f = aggregate(heat, off, 1.0, backend=backend)
    assert f.sum() == pytest.approx(0.5 / math.pi)
    off[0, 1, 1] = 10.0
    assert not aggregate(heat, off, 1.0, backend=backend).any()


@pytest.mark.parametrize("backend", BACKENDS)
def test_linearity_and_translation(backend):
    rng = np.random.default_rng(8)
    heat = rng.random((2, 12, 12)) * (rng.random((2, 12, 12)) < 0.3)
    off = rng.normal(0, 1.5, (4, 12, 12))
    f = aggregate(heat, off, 2.0, backend=backend)
    np.testing.assert_allclose(aggregate(3.5 * heat, off, 2.0, backend=backend), 3.5 * f, rtol=1e-12)
    # shifting every offset by a whole cell shifts the activation by that cell
    heat2 = np.zeros_like(heat)
    heat2[:, 3:9, 3:9] = heat[:, 3:9, 3:9]
    g = aggregate(heat2, off, 2.0, backend=backend)
    shifted = off.copy()
    shifted[0::2] += 1.0
    g2 = aggregate(heat2, shifted, 2.0, backend=backend)
    np.testing.assert_allclose(g2[:, :, 1:], g[:, :, :-1], atol=1e-15)


def test_aggregate_input_errors():
    with pytest.raises(InvalidInputError):
        aggregate(np.zeros((2, 3, 3)), np.zeros((3, 3, 3)), 1.0)
    with pytest.raises(InvalidInputError):
        aggregate(np.zeros((1, 3, 3)), np.zeros((2, 3, 3)), 0.0)
    with pytest.raises(InvalidInputError):
        aggregate(np.zeros((1, 3, 3)), np.zeros((2, 3, 3)), 1.0, backend="gpu")
    heat = np.ones((1, 3, 3))
    off = np.zeros((2, 3, 3))
    off[0, 1, 1] = np.nan
    for backend in BACKENDS:
        with pytest.raises(InvalidInputError):
            aggregate(heat, off, 1.0, backend=backend)


def test_localize_single_cell_and_ties():
    t = make_crop_transform(Box(10, 20, 50, 120))
    f = np.zeros((NUM_KEYPOINTS, 353, 257))
    f[0, 7, 9] = 0.7
    pts, scores = localize(f, t)
    np.testing.assert_allclose(pts[0], t.crop_to_image(np.array([9.0, 7.0])))
    assert scores[0] == 0.7
    np.testing.assert_allclose(pts[1], t.crop_to_image(np.array([0.0, 0.0])))
    assert scores[1] == 0.0
    f[2, 5, 5] = f[2, 3, 200] = 0.4  # equal peaks: smaller row-major index wins
    pts, _ = localize(f, t)
    np.testing.assert_allclose(pts[2], t.crop_to_image(np.array([200.0, 3.0])))


def test_rescore_values():
    assert rescore(np.full((17, 4, 4), 0.3)) == pytest.approx(0.3)
    f = np.zeros((17, 4, 4))
    f[0, 1, 1] = 1.0
    assert rescore(f) == pytest.approx(1 / 17)


def test_oracle_round_trip_recovers_keypoints():
    rng = np.random.default_rng(4)
    box = Box(100.0, 50.0, 120.0, 260.0)
    t = make_crop_transform(box)
    kp = np.column_stack(
        [rng.uniform(box.x_min, box.x_max, NUM_KEYPOINTS), rng.uniform(box.y_min, box.y_max, NUM_KEYPOINTS), np.full(NUM_KEYPOINTS, 2.0)]
    )
    pose = Pose(kp, area=box.area, image_id=3)
    heat, off = oracle_tensors(pose, t)
    det = decode_crop(heat, off, t, 25.0, box, 3)
    crop_err = np.abs(t.image_to_crop(det.keypoints) - np.round(t.image_to_crop(pose.xy)))
    assert crop_err.max() <= 0.5 + 1e-9
    assert np.linalg.norm(t.image_to_crop(det.keypoints) - t.image_to_crop(pose.xy), axis=1).max() <= 1.0
    assert det.image_id == 3 and det.box == box


def test_oracle_rescore_near_one_and_scaling():
    heat, off = oracle_tensors(grid_pose(), UNIT, 25.0)
    f = aggregate(heat, off, 25.0)
    s = rescore(f)
    assert 0.99 <= s <= 1.02
    det = decode_crop(heat, off, UNIT, 25.0, Box(0, 0, 257, 353), 1)
    det2 = decode_crop(2.0 * heat, off, UNIT, 25.0, Box(0, 0, 257, 353), 1)
    assert det2.instance_score == pytest.approx(2 * det.instance_score, rel=1e-12)
    np.testing.assert_array_equal(det2.keypoints, det.keypoints)


def test_decode_zero_tensors():
    det = decode_crop(np.zeros((17, 353, 257)), np.zeros((34, 353, 257)), UNIT, 25.0, Box(0, 0, 257, 353), 1)
    assert det.instance_score == 0.0
    assert not det.keypoint_scores.any()


def test_decode_rejects_wrong_grid():
    with pytest.raises(InvalidInputError):
        decode_crop(np.zeros((17, 10, 10)), np.zeros((34, 10, 10)), UNIT, 25.0, Box(0, 0, 1, 1), 1)
