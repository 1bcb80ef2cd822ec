import math
from fractions import Fraction

import numpy as np
import pytest

from elimpose.elimderive import load_generators
from elimpose.solvers import PoseSolution, epipolar_residual
from elimpose.synth import (
    LOG_FLOOR,
    METRIC_COLUMNS,
    DistortionError,
    SceneConfig,
    SceneError,
    SceneInstance,
    add_noise,
    distort,
    evaluate,
    random_scene,
    undistort,
)

PIDS = ["FEF", "EF", "EFK", "HF"]


def _gen_values(pid, M):
    v = np.concatenate([M[:, :3].ravel(), M[:, 3]]) if pid == "EFK" else M.ravel()
    v = v / np.linalg.norm(v)
    pt = [Fraction(float(x)) for x in v]
    out = []
    for g in load_generators(pid):
        scale = sum(abs(float(c)) for c in g.terms.values())
        out.append(abs(float(g.evaluate(pt))) / scale)
    return out


@pytest.mark.parametrize("pid", PIDS)
def test_deterministic(pid):
    a, b = random_scene(pid, seed=17), random_scene(pid, seed=17)
    assert np.array_equal(a.correspondences, b.correspondences)
    assert a.dumps() == b.dumps()
    assert not np.array_equal(a.correspondences, random_scene(pid, seed=18).correspondences)


@pytest.mark.parametrize("pid", PIDS)
def test_scene_geometry(pid):
    cfg = SceneConfig()
    for seed in range(20):
        sc = random_scene(pid, seed=seed)
        assert np.allclose(sc.R.T @ sc.R, np.eye(3), atol=1e-12)
        assert np.linalg.det(sc.R) == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.abs(sc.points) <= cfg.cube)
        assert cfg.f_range[0] <= sc.focal <= cfg.f_range[1]
        assert sc.correspondences.shape == ({"FEF": 6, "EF": 6, "EFK": 7, "HF": 4}[pid], 4)
        if pid == "EFK":
            assert cfg.lam_range[0] <= sc.lam <= cfg.lam_range[1]
        else:
            assert sc.lam == 0.0


@pytest.mark.parametrize("pid", PIDS)
def test_ground_truth_satisfies_generators(pid):
    for seed in range(10):
        sc = random_scene(pid, seed=seed)
        assert max(_gen_values(pid, sc.matrix)) <= 1e-10


@pytest.mark.parametrize("pid", ["FEF", "EF", "EFK"])
def test_ground_truth_epipolar(pid):
    for seed in range(20):
        sc = random_scene(pid, seed=seed)
        assert epipolar_residual(pid, sc.matrix, sc.correspondences) <= 1e-12


def test_homography_maps_points():
    sc = random_scene("HF", seed=2)
    X = np.column_stack([sc.correspondences[:, :2], np.ones(4)])
    x = X @ sc.matrix.T
    assert np.allclose(x[:, :2] / x[:, 2:], sc.correspondences[:, 2:], atol=1e-12)


def test_fixed_focal_and_lambda():
    sc = random_scene("EFK", SceneConfig(f_range=(2.0, 2.0), lam=-0.3), seed=1)
    assert sc.focal == 2.0 and sc.lam == -0.3


def test_distort_round_trip():
    rng = np.random.default_rng(0)
    p = rng.uniform(-0.5, 0.5, (200, 2))
    for lam in np.linspace(-0.7, 0.0, 8):
        d = distort(p, lam)
        u = undistort(d, lam)
        assert np.allclose(u[:, :2] / u[:, 2:], p, atol=1e-12)
    assert np.array_equal(distort(p, 0.0), p)


def test_distortion_branch_error():
    with pytest.raises(DistortionError):
        distort(np.array([1.0, 1.0]), 0.5)


def test_noise_statistics():
    z = np.zeros((25000, 4))
    n = add_noise(z, 0.01, seed=3)
    assert abs(n.std() / 0.01 - 1) <= 0.05
    assert abs(n.mean()) <= 1e-3
    assert np.array_equal(add_noise(z, 0.0, seed=3), z)
    assert np.array_equal(add_noise(z[:5], 0.01, seed=4), add_noise(z[:5], 0.01, seed=4))
    img = add_noise(z[:5], 0.01, seed=4, image_only=True)
    assert np.all(img[:, :2] == 0) and np.any(img[:, 2:] != 0)
    with pytest.raises(ValueError):
        add_noise(z, -1.0, seed=0)


def _sol(f, lam=None):
    return PoseSolution("EF", np.eye(3), focal=f, lam=lam)


def test_evaluate_examples():
    sc = random_scene("EF", SceneConfig(f_range=(2.0, 2.0)), seed=0)
    rec = evaluate([_sol(1.9), _sol(5.0)], sc)
    assert rec["log10_rel_f"] == pytest.approx(math.log10(0.05))
    assert rec["failure"] and rec["n_solutions"] == 2
    assert evaluate([_sol(2.0)], sc)["log10_rel_f"] == LOG_FLOOR
    empty = evaluate([], sc)
    assert empty["failure"] and math.isnan(empty["log10_rel_f"])
    assert set(METRIC_COLUMNS) <= set(rec)


def test_evaluate_lambda():
    sc = random_scene("EFK", SceneConfig(f_range=(2.0, 2.0), lam=-0.3), seed=0)
    rec = evaluate([_sol(2.0, -0.3)], sc)
    assert rec["log10_rel_lambda"] == LOG_FLOOR and not rec["failure"]
    assert evaluate([_sol(2.0, -0.2)], sc)["failure"]
    assert evaluate([_sol(2.0)], sc)["failure"]


def test_scene_json_round_trip():
    sc = random_scene("EFK", seed=5)
    back = SceneInstance.from_json(sc.to_json())
    assert back.dumps() == sc.dumps()
    assert np.array_equal(back.matrix, sc.matrix)


def test_infeasible_scene():
    cfg = SceneConfig(lam=10.0, f_range=(50.0, 50.0), max_tries=3)
    with pytest.raises(SceneError):
        random_scene("EFK", cfg, seed=0)


@pytest.mark.parametrize(
    "cfg",
    [SceneConfig(f_range=(0.0, 1.0)), SceneConfig(lam_range=(0.0, -1.0)), SceneConfig(pixel=0.0)],
)
def test_invalid_config(cfg):
    with pytest.raises(ValueError):
        random_scene("EF", cfg, seed=0)
