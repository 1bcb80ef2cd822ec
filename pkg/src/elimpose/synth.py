"""Synthetic two-view scenes with known focal length and distortion.

Points are drawn in a cube, cameras sit on a sphere around it looking at the
centroid with a small random tilt, and the left camera is the reference for
the epipolar relation ``x^T F x' = 0``.  For EF and EFK the left camera is
calibrated and the right one carries the unknown focal length (and, for
EFK, division-model distortion).  Hf scenes are a single camera viewing
points on the plane ``z = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .elimderive import get_problem

__all__ = [
    "SceneConfig",
    "SceneInstance",
    "SceneError",
    "DistortionError",
    "random_scene",
    "distort",
    "undistort",
    "add_noise",
    "evaluate",
    "METRIC_COLUMNS",
    "log10_rel",
    "skew",
]

METRIC_COLUMNS = ("problem", "seed", "sigma", "n_solutions", "log10_rel_f", "log10_rel_lambda", "failure")
LOG_FLOOR = -16.0
FAIL_REL = 1e-3
POINTS = {"FEF": 6, "EF": 6, "EFK": 7, "HF": 4}


class SceneError(RuntimeError):
    pass


class DistortionError(ValueError):
    pass


@dataclass
class SceneConfig:
    cube: float = 10.0  # points in [-cube, cube]^3
    f_range: tuple = (0.5, 5.0)
    lam_range: tuple = (-0.7, 0.0)
    lam: float | None = None  # fixed distortion overrides lam_range
    radius_range: tuple = (5.0, 15.0)  # extra distance beyond the cube's circumradius
    jitter_deg: float = 10.0
    pixel: float = 0.002  # image units per pixel (1000-pixel wide image)
    n_points: int | None = None
    max_tries: int = 100

    def validate(self):
        if not (0 < self.f_range[0] <= self.f_range[1]):
            raise ValueError("focal range must be positive and ordered")
        if self.lam_range[0] > self.lam_range[1]:
            raise ValueError("distortion range must be ordered")
        if self.cube <= 0 or self.radius_range[0] <= 0 or self.radius_range[0] > self.radius_range[1]:
            raise ValueError("invalid geometry ranges")
        if self.pixel <= 0:
            raise ValueError("pixel size must be positive")
        return self


@dataclass
class SceneInstance:
    problem: str
    seed: int
    R: np.ndarray  # relative rotation left -> right (Hf: world -> camera)
    t: np.ndarray
    f_left: float
    f_right: float
    lam: float
    points: np.ndarray  # (N, 3) world points
    correspondences: np.ndarray  # (N, 4): x1, y1, x2, y2
    matrix: np.ndarray  # ground-truth F, lifted F, or H
    cameras: dict = field(default_factory=dict)

    @property
    def focal(self) -> float:
        """The focal length a solver estimates."""
        return self.f_right if self.problem in ("EF", "EFK") else self.f_left

    def to_json(self) -> dict:
        arr = lambda a: np.asarray(a).tolist()
        return {
            "problem": self.problem,
            "seed": self.seed,
            "R": arr(self.R),
            "t": arr(self.t),
            "f_left": self.f_left,
            "f_right": self.f_right,
            "lambda": self.lam,
            "points": arr(self.points),
            "correspondences": arr(self.correspondences),
            "matrix": arr(self.matrix),
            "cameras": {k: arr(v) for k, v in self.cameras.items()},
        }

    @classmethod
    def from_json(cls, d: dict) -> "SceneInstance":
        a = np.asarray
        return cls(
            d["problem"], int(d["seed"]), a(d["R"]), a(d["t"]), float(d["f_left"]), float(d["f_right"]),
            float(d["lambda"]), a(d["points"]), a(d["correspondences"]), a(d["matrix"]),
            {k: a(v) for k, v in d.get("cameras", {}).items()},
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def skew(t) -> np.ndarray:
    x, y, z = t
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _look_at(center: np.ndarray, target: np.ndarray, jitter: float, rng) -> np.ndarray:
    """Rotation whose third row (the optical axis) points from center to target, tilted."""
    z = target - center
    z /= np.linalg.norm(z)
    axis = np.cross(z, rng.standard_normal(3))
    axis /= np.linalg.norm(axis)
    ang = math.radians(jitter) * rng.uniform(0.0, 1.0)
    z = z * math.cos(ang) + np.cross(axis, z) * math.sin(ang)
    x = np.cross(rng.standard_normal(3), z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.vstack([x, y, z])


def _camera(cfg: SceneConfig, rng, target: np.ndarray):
    d = rng.standard_normal(3)
    d /= np.linalg.norm(d)
    dist = cfg.cube * math.sqrt(3) + rng.uniform(*cfg.radius_range)
    c = target + dist * d
    R = _look_at(c, target, cfg.jitter_deg, rng)
    return R, -R @ c


def _project(K, R, t, X) -> tuple:
    Xc = X @ R.T + t
    x = Xc @ K.T
    return x[:, :2] / x[:, 2:3], Xc[:, 2]


def distort(points, lam: float) -> np.ndarray:
    """Inverse of the division model on the branch continuous at lam = 0.

    An undistorted point at radius r_u maps to radius
    r_d = 2 r_u / (1 + sqrt(1 - 4 lam r_u^2)).
    """
    p = np.asarray(points, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    r2 = np.sum(p * p, axis=1)
    disc = 1.0 - 4.0 * lam * r2
    if np.any(disc < 0):
        raise DistortionError("no real distorted radius for lam * r^2 > 1/4")
    scale = 2.0 / (1.0 + np.sqrt(disc))
    out = p * scale[:, None]
    return out[0] if single else out


def undistort(points_d, lam: float) -> np.ndarray:
    """Homogeneous undistorted point ``[x_d, y_d, 1 + lam (x_d^2 + y_d^2)]``."""
    p = np.asarray(points_d, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    out = np.column_stack([p, 1.0 + lam * np.sum(p * p, axis=1)])
    return out[0] if single else out


def random_scene(pid: str, config: SceneConfig | None = None, seed: int = 0) -> SceneInstance:
    """Deterministic scene and minimal correspondences for ``seed``."""
    cfg = (config or SceneConfig()).validate()
    pid = get_problem(pid).id
    n = cfg.n_points or POINTS[pid]
    if n < POINTS[pid]:
        raise ValueError(f"{pid} needs at least {POINTS[pid]} points")
    rng = np.random.default_rng(seed)
    target = np.zeros(3)
    for _ in range(cfg.max_tries):
        f = float(rng.uniform(*cfg.f_range))
        lam = float(cfg.lam if cfg.lam is not None else rng.uniform(*cfg.lam_range)) if pid == "EFK" else 0.0
        if pid == "HF":
            X = np.column_stack([rng.uniform(-cfg.cube, cfg.cube, (n, 2)), np.zeros(n)])
            R, t = _camera(cfg, rng, target)
            K = np.diag([f, f, 1.0])
            img, depth = _project(K, R, t, X)
            if np.any(depth <= 0):
                continue
            H = K @ np.column_stack([R[:, 0], R[:, 1], t])
            corr = np.hstack([X[:, :2], img])
            return SceneInstance(pid, seed, R, t, f, f, 0.0, X, corr, H, {"R": R, "t": t, "K": K})
        X = rng.uniform(-cfg.cube, cfg.cube, (n, 3))
        R1, t1 = _camera(cfg, rng, target)
        R2, t2 = _camera(cfg, rng, target)
        K1 = np.diag([f, f, 1.0]) if pid == "FEF" else np.eye(3)
        K2 = np.diag([f, f, 1.0])
        x1, d1 = _project(K1, R1, t1, X)
        x2, d2 = _project(K2, R2, t2, X)
        if np.any(d1 <= 0) or np.any(d2 <= 0):
            continue
        if pid == "EFK":
            try:
                x2 = distort(x2, lam)
            except DistortionError:
                continue
        R = R2 @ R1.T
        t = t2 - R @ t1
        E = (skew(t) @ R).T  # x1^T E x2 = 0 for calibrated rays
        if pid == "FEF":
            Ki = np.diag([1 / f, 1 / f, 1.0])
            M = Ki @ E @ Ki
        else:
            M = E @ np.diag([1 / f, 1 / f, 1.0])
            if pid == "EFK":
                M = np.hstack([M, lam * M[:, 2:3]])
        M = M / np.linalg.norm(M)
        corr = np.hstack([x1, x2])
        cams = {"R1": R1, "t1": t1, "R2": R2, "t2": t2, "K1": K1, "K2": K2}
        f_left = f if pid == "FEF" else 1.0
        return SceneInstance(pid, seed, R, t, f_left, f, lam, X, corr, M, cams)
    raise SceneError(f"no feasible {pid} scene after {cfg.max_tries} draws (seed {seed})")


def add_noise(corrs: np.ndarray, sigma: float, seed: int, image_only: bool = False) -> np.ndarray:
    """Gaussian perturbation of image coordinates (all four columns, or the
    image side only for 2D-3D input)."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    a = np.array(corrs, dtype=np.float64)
    if sigma == 0:
        return a
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, a.shape)
    if image_only:
        noise[:, :2] = 0.0
    return a + noise


def log10_rel(err: float) -> float:
    return max(math.log10(err), LOG_FLOOR) if err > 0 else LOG_FLOOR


def evaluate(solutions: list, scene: SceneInstance, sigma: float = 0.0) -> dict:
    """Closest-to-ground-truth errors of one solver run."""
    rec = {
        "problem": scene.problem,
        "seed": scene.seed,
        "sigma": sigma,
        "n_solutions": len(solutions),
        "log10_rel_f": float("nan"),
        "log10_rel_lambda": float("nan"),
        "failure": True,
        "f_est": float("nan"),
        "lambda_est": float("nan"),
    }
    fs = [s.focal for s in solutions if s.focal is not None]
    if not fs:
        return rec
    f_gt = scene.focal
    f_best = min(fs, key=lambda f: abs(f - f_gt))
    rel_f = abs(f_best - f_gt) / f_gt
    rec["f_est"] = f_best
    rec["log10_rel_f"] = log10_rel(rel_f)
    fail = rel_f > FAIL_REL
    if scene.problem == "EFK":
        lams = [s.lam for s in solutions if s.lam is not None]
        if lams:
            l_best = min(lams, key=lambda v: abs(v - scene.lam))
            den = abs(scene.lam) if scene.lam != 0 else 1.0
            rel_l = abs(l_best - scene.lam) / den
            rec["lambda_est"] = l_best
            rec["log10_rel_lambda"] = log10_rel(rel_l)
            fail = fail or rel_l > FAIL_REL
        else:
            fail = True
    rec["failure"] = bool(fail)
    return rec
