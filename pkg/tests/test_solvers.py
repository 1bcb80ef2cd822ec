import math

import numpy as np
import pytest

from elimpose.solvers import (
    ConditioningError,
    DegenerateInputError,
    ExtractionSingularError,
    InputCountError,
    NumPoly,
    PoseSolution,
    Tolerances,
    action_eigensolve,
    compiled_problem,
    epipolar_residual,
    extend_homography,
    extract_distortion,
    extract_focal_ef,
    extract_focal_fef,
    fef_roots_both_paths,
    hf_quartic,
    instantiate_generators,
    measurement_matrix,
    nullspace_parametrize,
    solve_minimal,
    sylvester_fef,
    sylvester_resultant,
)
from elimpose.synth import SceneConfig, random_scene, skew
from elimpose.templates import SolverTemplate

CAPS = {"FEF": 15, "EF": 9, "EFK": 19, "HF": 4}


def _rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    return q if np.linalg.det(q) > 0 else -q


def _essential(rng):
    return skew(rng.standard_normal(3)) @ _rotation(rng)


def _closest(sols, scene):
    return min(range(len(sols)), key=lambda i: abs(sols[i].focal - scene.focal))


# --- null space -----------------------------------------------------------------


@pytest.mark.parametrize("pid,dim", [("FEF", 3), ("EF", 3), ("EFK", 5), ("HF", 2)])
def test_nullspace_contains_ground_truth(pid, dim):
    sc = random_scene(pid, seed=4)
    param = nullspace_parametrize(pid, sc.correspondences)
    N = param.N
    assert N.shape[1] == dim
    assert np.allclose(N.T @ N, np.eye(dim), atol=1e-12)
    M = measurement_matrix(pid, sc.correspondences)
    assert np.linalg.norm(M @ N) <= 1e-12 * np.linalg.norm(M)
    m = sc.matrix
    v = np.concatenate([m[:, :3].ravel(), m[:, 3]]) if pid == "EFK" else m.ravel()
    v = v / np.linalg.norm(v)
    assert np.linalg.norm(v - N @ (N.T @ v)) <= 1e-10
    assert len(param.basis) == dim


def test_duplicated_points_are_degenerate():
    a = random_scene("FEF", seed=1).correspondences.copy()
    a[3:] = a[:3]
    with pytest.raises(DegenerateInputError):
        nullspace_parametrize("FEF", a)


def test_wrong_count():
    a = random_scene("FEF", seed=1).correspondences
    with pytest.raises(InputCountError):
        solve_minimal("FEF", a[:5])
    with pytest.raises(InputCountError):
        solve_minimal("EFK", a)


def test_non_finite_rejected():
    a = random_scene("EF", seed=1).correspondences.copy()
    a[0, 0] = np.nan
    with pytest.raises(ValueError):
        solve_minimal("EF", a)


# --- full solves ------------------------------------------------------------------


def test_fef_focal_two():
    cfg = SceneConfig(f_range=(2.0, 2.0))
    sc = random_scene("FEF", cfg, seed=9)
    sols = solve_minimal("FEF", sc.correspondences)
    assert min(abs(s.focal - 2.0) / 2.0 for s in sols) <= 1e-6


@pytest.mark.parametrize("pid", ["FEF", "EF", "EFK", "HF"])
def test_solution_properties(pid):
    for seed in range(15):
        sc = random_scene(pid, seed=seed)
        sols = solve_minimal(pid, sc.correspondences)
        assert 0 < len(sols) <= CAPS[pid]
        for s in sols:
            assert s.focal > 0
            assert s.residuals["epipolar"] <= 1e-8
            assert s.residuals["generator"] <= 1e-6
            if pid in ("FEF", "EF"):
                assert s.residuals["det"] <= 1e-8
            if pid == "EFK":
                m = s.matrix
                assert np.linalg.norm(m[:, 3] - s.lam * m[:, 2]) <= 1e-6 * np.linalg.norm(m)
        i = _closest(sols, sc)
        assert abs(sols[i].focal - sc.focal) <= 1e-6 * sc.focal
        if pid == "EFK":
            assert abs(sols[i].lam - sc.lam) <= 1e-6 * max(abs(sc.lam), 1e-3)


def test_solutions_sorted_and_deterministic():
    sc = random_scene("EF", seed=2)
    a = solve_minimal("EF", sc.correspondences)
    b = solve_minimal("EF", sc.correspondences)
    assert [s.focal for s in a] == sorted(s.focal for s in a)
    assert [s.to_json() for s in a] == [s.to_json() for s in b]


def test_polish_keeps_quality():
    sc = random_scene("FEF", seed=3)
    sols = solve_minimal("FEF", sc.correspondences, polish=True)
    i = _closest(sols, sc)
    assert abs(sols[i].focal - sc.focal) <= 1e-8 * sc.focal


def test_without_normalization():
    sc = random_scene("EF", seed=5)
    sols = solve_minimal("EF", sc.correspondences, normalize=False)
    assert abs(sols[_closest(sols, sc)].focal - sc.focal) <= 1e-6 * sc.focal


@pytest.mark.parametrize("pid", ["FEF", "EF", "EFK"])
def test_selection_stable_under_image_scaling(pid):
    for seed in range(5):
        sc = random_scene(pid, seed=seed)
        a = sc.correspondences.copy()
        s = 3.0
        cols = [2, 3] if pid != "FEF" else [0, 1, 2, 3]
        b = a.copy()
        b[:, cols] *= s
        if pid == "EFK":
            continue  # distortion is not scale invariant; covered by the lambda test
        sa, sb = solve_minimal(pid, a), solve_minimal(pid, b)
        assert len(sa) == len(sb)
        ia = _closest(sa, sc)
        ib = min(range(len(sb)), key=lambda i: abs(sb[i].focal - s * sc.focal))
        assert ia == ib
        assert sb[ib].focal == pytest.approx(s * sa[ia].focal, rel=1e-6)


def test_solution_json_shape():
    sc = random_scene("EFK", seed=1)
    s = solve_minimal("EFK", sc.correspondences)[0]
    d = s.to_json()
    assert len(d["matrix"]) == 12 and d["shape"] == [3, 4]
    assert {"focal", "lambda", "residuals"} <= set(d)


# --- action matrix and resultant -------------------------------------------------


def test_companion_sanity():
    tpl = SolverTemplate("HF", ("x",), "x", [(0, (0,))], [(2,), (1,), (0,)], [(1,), (0,)], 0, 1)
    C = np.array([[1.0, -3.0, 2.0]])
    roots = sorted(u[0] for u in action_eigensolve(C, tpl))
    assert roots == pytest.approx([1.0, 2.0], abs=1e-12)


def test_linear_resultant():
    a, b = 1.5, -0.25
    p = NumPoly([(1, 0), (0, 0)], [1.0, -a])
    q = NumPoly([(1, 0), (0, 0)], [1.0, -b])
    res = sylvester_resultant(p, q, var=0, samples=8, radius=1.0)
    assert abs(res[0]) == pytest.approx(abs(a - b), rel=1e-12)
    assert np.allclose(res[1:], 0, atol=1e-12)


def test_fef_resultant_degree_fifteen():
    sc = random_scene("FEF", seed=8)
    cubic, quintic = instantiate_generators("FEF", nullspace_parametrize("FEF", sc.correspondences).N)
    res = sylvester_resultant(cubic, quintic, samples=16)
    nz = np.nonzero(np.abs(res) > 1e-9 * np.abs(res).max())[0]
    assert nz.max() == 15


@pytest.mark.parametrize("seed", range(10))
def test_cross_path_agreement(seed):
    sc = random_scene("FEF", seed=1000 + seed)
    act, syl = fef_roots_both_paths(sc.correspondences, polish=True)
    assert len(act) == len(syl)
    left = list(syl)
    for a in act:
        j = min(range(len(left)), key=lambda k: np.linalg.norm(left[k] - a))
        assert np.max(np.abs(left[j] - a) / np.maximum(1, np.abs(a))) <= 1e-6
        left.pop(j)


def test_sylvester_small_system():
    # x^3 - y = 0 and x y^4 + y^5 - 2 = 0 meet at (1, 1)
    cubic = NumPoly([(3, 0), (0, 1)], [1.0, -1.0])
    quintic = NumPoly([(1, 4), (0, 5), (0, 0)], [1.0, 1.0, -2.0])
    roots = sylvester_fef(cubic, quintic)
    assert any(np.allclose(u, [1.0, 1.0], atol=1e-10) for u in roots)
    for u in roots:
        assert abs(cubic(u)) < 1e-7 and abs(quintic(u)) < 1e-7


def test_sylvester_point_at_infinity():
    # both top forms vanish at (1:0), an intrinsic loss of Bezout count
    cubic = NumPoly([(0, 3), (1, 1), (0, 0)], [1.0, 1.0, -1.0])
    quintic = NumPoly([(0, 5), (2, 1), (0, 0)], [1.0, -1.0, -0.5])
    with pytest.raises(ConditioningError):
        sylvester_fef(cubic, quintic)


def test_conditioning_error_on_zero_template():
    tpl = compiled_problem("EF").template
    with pytest.raises(ConditioningError):
        action_eigensolve(np.zeros(tpl.shape), tpl)


# --- extraction formulas --------------------------------------------------------------


def test_ef_formula_forward_and_scale():
    rng = np.random.default_rng(0)
    E = _essential(rng)
    F = E @ np.diag([1 / 3, 1 / 3, 1.0])
    assert extract_focal_ef(F) == pytest.approx(9.0, rel=1e-10)
    assert extract_focal_ef(5 * F) == pytest.approx(9.0, rel=1e-10)
    assert extract_focal_ef(E) == pytest.approx(1.0, rel=1e-10)


def test_ef_two_pair_ambiguity():
    rng = np.random.default_rng(1)
    E = _essential(rng)
    f = 2.5
    F = E @ np.diag([1 / f, 1 / f, 1.0])
    E2 = F @ np.diag([-f, -f, 1.0])  # the second pair (E diag(-1,-1,1), -f)
    U, s, Vt = np.linalg.svd(E2)
    assert s[0] == pytest.approx(s[1], rel=1e-10) and s[2] < 1e-10 * s[0]
    f2 = extract_focal_ef(F)
    assert math.sqrt(f2) == pytest.approx(f, rel=1e-10)


def test_fef_formula_forward():
    rng = np.random.default_rng(2)
    E = _essential(rng)
    Ki = np.diag([0.5, 0.5, 1.0])
    assert extract_focal_fef(Ki @ E @ Ki) == pytest.approx(4.0, rel=1e-10)
    assert extract_focal_fef(E) == pytest.approx(1.0, rel=1e-10)


def test_fef_formula_singular_family():
    F = np.array([[1.0, 2.0, 3.0], [0.5, -1.0, 2.0], [0.0, 0.0, 1.0]])
    with pytest.raises(ExtractionSingularError):
        extract_focal_fef(F)


def test_ef_formula_singular():
    with pytest.raises(ExtractionSingularError):
        extract_focal_ef(np.zeros((3, 3)))


def test_distortion_extraction():
    rng = np.random.default_rng(3)
    F = rng.standard_normal((3, 3))
    Fh = np.hstack([F, -0.3 * F[:, 2:3]])
    assert extract_distortion(Fh) == pytest.approx(-0.3, rel=1e-12)
    assert extract_distortion(-7 * Fh) == pytest.approx(-0.3, rel=1e-12)
    assert extract_distortion(np.hstack([F, np.zeros((3, 1))])) == 0.0
    with pytest.raises(ExtractionSingularError):
        extract_distortion(np.zeros((3, 4)))


def test_homography_extension():
    rng = np.random.default_rng(4)
    R, t = _rotation(rng), rng.standard_normal(3)
    H1 = np.column_stack([R[:, 0], R[:, 1], t])
    w, ok = extend_homography(H1.ravel())
    assert ok and w == pytest.approx(1.0, rel=1e-10)
    H = np.diag([1.5, 1.5, 1.0]) @ H1
    w, ok = extend_homography(H.ravel())
    assert ok and w == pytest.approx(2 / 3, rel=1e-10)
    h = np.zeros(9)
    h[0], h[1], h[6], h[7] = 1.0, 0.0, 1.0, 1.0  # h1 h2 + h4 h5 = 0, h7 h8 != 0
    assert extend_homography(h) == (None, False)


def test_hf_quartic_degree_and_ground_truth_root():
    sc = random_scene("HF", seed=6)
    param = nullspace_parametrize("HF", sc.correspondences)
    c = hf_quartic(param)
    assert len(c) == 5 and abs(c[4]) > 0
    sols = solve_minimal("HF", sc.correspondences)
    assert any(abs(s.focal - sc.focal) <= 1e-8 * sc.focal for s in sols)


def test_epipolar_residual_of_truth():
    sc = random_scene("EF", seed=7)
    assert epipolar_residual("EF", sc.matrix, sc.correspondences) <= 1e-12
    assert epipolar_residual("EF", np.eye(3), sc.correspondences) > 1e-3


def test_tolerance_override():
    t = Tolerances().override(imag=1e-4, generator=None)
    assert t.imag == 1e-4 and t.generator == Tolerances().generator
    with pytest.raises(KeyError):
        Tolerances().override(bogus=1)


def test_pose_solution_json():
    s = PoseSolution("EF", np.eye(3), focal=2.0, residuals={"epipolar": 0.0})
    d = s.to_json()
    assert d["matrix"] == [1.0, 0, 0, 0, 1.0, 0, 0, 0, 1.0]
    assert d["focal"] == 2.0 and d["lambda"] is None
