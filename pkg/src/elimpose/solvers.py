"""Online numeric solvers.

Pipeline for FEF / EF / EFK: build the measurement matrix, take its null
space ``N`` (orthonormal columns), substitute ``x_l = N (u, 1)`` into the
derived generators, fill the elimination template, run Gauss-Jordan, read
the action matrix and recover ``u`` from its eigenvectors.  The matrix is
then reassembled and focal length / distortion are extracted in closed
form.  Hf solves a single quartic.

Image conventions follow ``elimderive``: the epipolar constraint is
``x^T F x' = 0`` with ``x`` the left (calibrated for EF/EFK) point.  For Hf
a correspondence is (plane point, image point).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np

from . import kernels
from .elimderive import get_problem, load_generators
from .templates import SolverTemplate, load_template

__all__ = [
    "Correspondence",
    "PoseSolution",
    "NullspaceParam",
    "Tolerances",
    "DegenerateInputError",
    "ConditioningError",
    "ExtractionSingularError",
    "InputCountError",
    "measurement_matrix",
    "nullspace_parametrize",
    "CompiledProblem",
    "compiled_problem",
    "instantiate_generators",
    "action_eigensolve",
    "sylvester_fef",
    "sylvester_resultant",
    "solve_minimal",
    "fef_roots_both_paths",
    "extract_focal_ef",
    "extract_focal_fef",
    "extract_distortion",
    "extend_homography",
    "epipolar_residual",
    "NumPoly",
]


class DegenerateInputError(ValueError):
    """Measurement matrix has lower rank than a generic configuration."""


class InputCountError(ValueError):
    """Wrong number of correspondences for the problem."""


class ConditioningError(RuntimeError):
    """Elimination or eigen-decomposition could not be carried out reliably."""


class ExtractionSingularError(ValueError):
    """A closed-form extraction has a (near) vanishing denominator."""


@dataclass
class Tolerances:
    rank: float = 1e-10  # singular-value ratio below which M is rank deficient
    pivot: float = 1e-12  # G-J pivot threshold, relative to max |entry|
    imag: float = 1e-6  # accept eigenvalue if |imag| <= imag * (1 + |real|)
    generator: float = 1e-6  # max normalized generator residual of a solution
    chart: float = 1e-8  # min |last homogeneous coordinate| before re-charting
    extraction: float = 1e-12  # relative denominator threshold
    sylvester: float = 1e-8  # residual gate of the resultant path
    chart_retries: int = 3

    def override(self, **kw) -> "Tolerances":
        d = asdict(self)
        for k, v in kw.items():
            if v is None:
                continue
            if k not in d:
                raise KeyError(f"unknown tolerance {k!r}")
            d[k] = type(d[k])(v)
        return Tolerances(**d)


@dataclass(frozen=True)
class Correspondence:
    left: tuple
    right: tuple

    def __post_init__(self):
        vals = tuple(self.left) + tuple(self.right)
        if len(self.left) != 2 or len(self.right) != 2:
            raise ValueError("points must be 2D")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("non-finite coordinate")


def _as_array(corrs) -> np.ndarray:
    if isinstance(corrs, np.ndarray):
        a = np.asarray(corrs, dtype=np.float64)
    else:
        a = np.array([tuple(c.left) + tuple(c.right) for c in corrs], dtype=np.float64).reshape(-1, 4)
    if a.ndim != 2 or a.shape[1] != 4:
        raise ValueError("correspondences must be an (n, 4) array")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite coordinate")
    return a


@dataclass
class NullspaceParam:
    problem: str
    M: np.ndarray
    N: np.ndarray  # (len(x_l), null_dim), orthonormal columns
    singular_values: np.ndarray

    @property
    def basis(self) -> list:
        """Null-space elements reshaped like the problem's matrix."""
        shape = (3, 4) if self.problem == "EFK" else (3, 3)
        return [_to_matrix(self.problem, self.N[:, k], shape) for k in range(self.N.shape[1])]


@dataclass
class PoseSolution:
    problem: str
    matrix: np.ndarray
    focal: float | None = None
    lam: float | None = None
    w: float | None = None
    unknowns: tuple = ()
    residuals: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "matrix": [float(v) for v in np.asarray(self.matrix).ravel()],
            "shape": list(np.asarray(self.matrix).shape),
            "focal": self.focal,
            "lambda": self.lam,
            "w": self.w,
            "unknowns": [float(v) for v in self.unknowns],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


# ---------------------------------------------------------------------------
# measurements and null space
# ---------------------------------------------------------------------------

_EXPECTED_ROWS = {"FEF": 6, "EF": 6, "EFK": 7, "HF": 4}


def _to_matrix(pid: str, v: np.ndarray, shape=None) -> np.ndarray:
    if pid == "EFK":
        F = v[:9].reshape(3, 3)
        return np.hstack([F, v[9:12].reshape(3, 1)])
    return v.reshape(3, 3)


def measurement_matrix(pid: str, corrs) -> np.ndarray:
    """Rows of the linear constraints on ``x_l``."""
    pid = get_problem(pid).id
    a = _as_array(corrs)
    need = _EXPECTED_ROWS[pid]
    if a.shape[0] != need:
        raise InputCountError(f"{pid} needs exactly {need} correspondences, got {a.shape[0]}")
    x = np.column_stack([a[:, 0], a[:, 1], np.ones(len(a))])
    if pid in ("FEF", "EF"):
        xp = np.column_stack([a[:, 2], a[:, 3], np.ones(len(a))])
        return np.einsum("ni,nj->nij", x, xp).reshape(len(a), 9)
    if pid == "EFK":
        xd = np.column_stack([a[:, 2], a[:, 3], np.ones(len(a))])
        r2 = a[:, 2] ** 2 + a[:, 3] ** 2
        left = np.einsum("ni,nj->nij", x, xd).reshape(len(a), 9)
        return np.hstack([left, x * r2[:, None]])
    # Hf: [u]_x H X = 0, first two rows per point, seven equations in all
    X = np.column_stack([a[:, 0], a[:, 1], np.ones(len(a))])
    u, v = a[:, 2], a[:, 3]
    rows = []
    for i in range(len(a)):
        z = np.zeros(3)
        rows.append(np.concatenate([z, -X[i], v[i] * X[i]]))
        rows.append(np.concatenate([X[i], z, -u[i] * X[i]]))
    return np.array(rows[:7])


def nullspace_parametrize(pid: str, corrs, tol: Tolerances | None = None) -> NullspaceParam:
    tol = tol or Tolerances()
    prob = get_problem(pid)
    M = measurement_matrix(prob.id, corrs)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    k = prob.n_equations
    if s[0] == 0 or s[k - 1] <= tol.rank * s[0]:
        raise DegenerateInputError(
            f"{prob.id}: measurement matrix rank below {k} (sigma_min/sigma_max = {s[k - 1] / max(s[0], 1e-300):.2e})"
        )
    N = Vt[k:].T.copy()
    return NullspaceParam(prob.id, M, N, s)


# ---------------------------------------------------------------------------
# numeric polynomials
# ---------------------------------------------------------------------------


class NumPoly:
    """Float polynomial as exponent rows and coefficients."""

    __slots__ = ("exps", "coefs")

    def __init__(self, exps, coefs):
        self.exps = np.asarray(exps, dtype=np.int64).reshape(len(coefs), -1)
        self.coefs = np.asarray(coefs, dtype=np.float64)

    @classmethod
    def from_poly(cls, p) -> "NumPoly":
        items = list(p.terms.items())
        return cls([m for m, _ in items], [float(c) for _, c in items])

    @classmethod
    def from_dict(cls, d: dict) -> "NumPoly":
        return cls(list(d.keys()), list(d.values()))

    @property
    def nvars(self) -> int:
        return self.exps.shape[1]

    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if len(self.coefs) else -1

    def monomial_values(self, u) -> np.ndarray:
        u = np.asarray(u)
        return np.prod(np.power(u[None, :], self.exps), axis=1)

    def __call__(self, u):
        return self.coefs @ self.monomial_values(u)

    def residual(self, u) -> float:
        """|p(u)| relative to the sum of absolute term values."""
        mv = self.monomial_values(u)
        den = np.abs(self.coefs * mv).sum()
        return float(abs(self.coefs @ mv) / den) if den > 0 else float(abs(self.coefs @ mv))

    def gradient(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.result_type(u, np.float64))
        g = np.zeros(self.nvars, dtype=u.dtype)
        for j in range(self.nvars):
            e = self.exps[:, j]
            mask = e > 0
            if not mask.any():
                continue
            de = self.exps[mask].copy()
            de[:, j] -= 1
            g[j] = (self.coefs[mask] * e[mask]) @ np.prod(np.power(u[None, :], de), axis=1)
        return g

    def coefficients_in(self, var: int) -> dict:
        """Map power of ``var`` to the remaining polynomial (as NumPoly)."""
        out: dict = {}
        for e, c in zip(self.exps, self.coefs):
            k = int(e[var])
            rest = tuple(int(v) for i, v in enumerate(e) if i != var)
            out.setdefault(k, {})
            out[k][rest] = out[k].get(rest, 0.0) + c
        return {k: NumPoly.from_dict(v) for k, v in out.items()}


# ---------------------------------------------------------------------------
# compiled problem: instantiation tables and template fill maps
# ---------------------------------------------------------------------------


def _hom_monomials(m: int, d: int) -> list:
    out = []
    for combo in itertools.combinations_with_replacement(range(m), d):
        e = [0] * m
        for v in combo:
            e[v] += 1
        out.append(tuple(e))
    return out


class CompiledProblem:
    """Precomputed index tables for one problem and template (read-only)."""

    def __init__(self, pid: str, template: SolverTemplate | None, generators: list | None = None):
        prob = get_problem(pid)
        self.prob = prob
        self.template = template
        gens = generators if generators is not None else load_generators(prob.id)
        self.generators = gens
        k = len(prob.unknowns)
        m = k + 1
        self.m = m
        D = max(g.degree() for g in gens)
        self.hom = [_hom_monomials(m, d) for d in range(D + 1)]
        hidx = [{e: i for i, e in enumerate(h)} for h in self.hom]
        self.sizes = np.array([len(h) for h in self.hom], dtype=np.int64)
        mul, mul_off, off = [], [], 0
        for d in range(D):
            mul_off.append(off)
            for e in self.hom[d]:
                for v in range(m):
                    e2 = list(e)
                    e2[v] += 1
                    mul.append(hidx[d + 1][tuple(e2)])
            off += len(self.hom[d]) * m
        self.mul = np.array(mul, dtype=np.int64)
        self.mul_off = np.array(mul_off + [off], dtype=np.int64)
        t_vars, t_deg, t_coef, t_out = [], [], [], []
        self.gen_offsets = []
        out = 0
        for g in gens:
            d = g.degree()
            self.gen_offsets.append((out, d))
            for mono, c in g.terms.items():
                vs = [i for i, e in enumerate(mono) for _ in range(e)]
                t_vars.append(vs + [0] * (D - len(vs)))
                t_deg.append(len(vs))
                t_coef.append(float(c))
                t_out.append(out)
            out += len(self.hom[d])
        self.out_len = out
        self.t_vars = np.array(t_vars, dtype=np.int64).reshape(-1, max(D, 1))
        self.t_deg = np.array(t_deg, dtype=np.int64)
        self.t_coef = np.array(t_coef, dtype=np.float64)
        self.t_out = np.array(t_out, dtype=np.int64)
        if template is not None:
            self._build_fill(template)

    def _build_fill(self, tpl: SolverTemplate):
        if tpl.problem != self.prob.id:
            raise ValueError(f"template is for {tpl.problem}, not {self.prob.id}")
        if tuple(tpl.unknowns) != tuple(self.prob.unknowns):
            raise ValueError("template unknowns do not match the problem")
        cols = tpl.column_index
        ri, ci, si = [], [], []
        for r, (gi, mu) in enumerate(tpl.multipliers):
            if gi >= len(self.generators):
                raise ValueError(f"template refers to generator {gi}, only {len(self.generators)} loaded")
            off, d = self.gen_offsets[gi]
            for j, e in enumerate(self.hom[d]):
                aff = tuple(a + b for a, b in zip(e[:-1], mu))
                if aff not in cols:
                    raise ValueError(f"template lacks column {aff}")
                ri.append(r)
                ci.append(cols[aff])
                si.append(off + j)
        self.fill_rows = np.array(ri, dtype=np.int64)
        self.fill_cols = np.array(ci, dtype=np.int64)
        self.fill_src = np.array(si, dtype=np.int64)
        self.shape = (tpl.rows, tpl.cols)
        bidx = {b: j for j, b in enumerate(tpl.basis)}
        k = self.m - 1
        one = (0,) * k
        if one not in bidx or any(tuple(int(i == j) for i in range(k)) not in bidx for j in range(k)):
            raise ValueError("basis must contain 1 and every unknown")
        self.basis_one = bidx[one]
        self.basis_vars = [bidx[tuple(int(i == j) for i in range(k))] for j in range(k)]

    def instantiate(self, L: np.ndarray, backend=None) -> np.ndarray:
        impl = backend or kernels
        return impl.instantiate(
            np.ascontiguousarray(L, dtype=np.float64), self.t_vars, self.t_deg, self.t_coef,
            self.t_out, self.mul, self.mul_off, self.sizes, self.out_len,
        )

    def numpolys(self, coeffs: np.ndarray) -> list:
        """Instantiated generators as NumPoly over the affine unknowns."""
        out = []
        for off, d in self.gen_offsets:
            exps = [e[:-1] for e in self.hom[d]]
            out.append(NumPoly(exps, coeffs[off : off + len(exps)]))
        return out

    def fill(self, coeffs: np.ndarray) -> np.ndarray:
        C = np.zeros(self.shape)
        C[self.fill_rows, self.fill_cols] = coeffs[self.fill_src]
        return C


@lru_cache(maxsize=None)
def _bundled(pid: str) -> CompiledProblem:
    pid = get_problem(pid).id
    return CompiledProblem(pid, load_template(pid))


def compiled_problem(pid: str, template: SolverTemplate | None = None) -> CompiledProblem:
    if template is None:
        return _bundled(get_problem(pid).id)
    cp = template._cache.get("compiled")
    if cp is None:
        cp = CompiledProblem(pid, template)
        template._cache["compiled"] = cp
    return cp


def instantiate_generators(pid: str, N: np.ndarray, template: SolverTemplate | None = None) -> list:
    cp = compiled_problem(pid, template)
    return cp.numpolys(cp.instantiate(N))


# ---------------------------------------------------------------------------
# action matrix
# ---------------------------------------------------------------------------


def action_matrix(C: np.ndarray, tpl: SolverTemplate, tol: Tolerances | None = None) -> np.ndarray:
    tol = tol or Tolerances()
    A = np.ascontiguousarray(C, dtype=np.float64).copy()
    piv = kernels.gauss_jordan(A, tol.pivot)
    row_of = {int(c): r for r, c in enumerate(piv) if c >= 0}
    ne, nr, nb = tpl.n_excessive, tpl.n_reducible, len(tpl.basis)
    act = np.zeros((nb, nb))
    for j, (kind, idx) in enumerate(tpl.action_rows()):
        if kind == "basis":
            act[j, idx] = 1.0
        else:
            c = ne + idx
            if c not in row_of:
                raise ConditioningError(f"no pivot for reducible column {c} ({tpl.monomials[c]})")
            act[j] = -A[row_of[c], ne + nr :]
    return act


def _ratio_pairs(tpl: SolverTemplate) -> list:
    """For each unknown u_j, the basis index pairs (b, u_j * b) inside the basis."""
    k = len(tpl.unknowns)
    bidx = {b: j for j, b in enumerate(tpl.basis)}
    pairs = []
    for j in range(k):
        pj = []
        for b, i in bidx.items():
            ub = b[:j] + (b[j] + 1,) + b[j + 1 :]
            if ub in bidx:
                pj.append((i, bidx[ub]))
        if not pj:
            raise ValueError(f"basis does not determine unknown {tpl.unknowns[j]}")
        pairs.append(np.array(pj, dtype=np.int64))
    return pairs


def action_eigensolve(C: np.ndarray, tpl: SolverTemplate, tol: Tolerances | None = None) -> list:
    """Real solution vectors (values of the template unknowns).

    The action variable is the eigenvalue itself; every other unknown is
    the ratio v[u_j b] / v[b] over the basis pair with the largest |v[b]|,
    which avoids dividing by a tiny entry of the eigenvector.
    """
    tol = tol or Tolerances()
    act = action_matrix(C, tpl, tol)
    if not np.all(np.isfinite(act)):
        raise ConditioningError("non-finite action matrix")
    pairs = tpl._cache.get("ratio_pairs")
    if pairs is None:
        pairs = tpl._cache["ratio_pairs"] = _ratio_pairs(tpl)
    try:
        vals, vecs = np.linalg.eig(act)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"eigen-decomposition failed: {exc}") from None
    ai = tpl.action_index
    out = []
    for lam, v in zip(vals, vecs.T):
        if abs(lam.imag) > tol.imag * (1 + abs(lam.real)):
            continue
        u = np.empty(len(pairs))
        for j, pj in enumerate(pairs):
            if j == ai:
                u[j] = lam.real
                continue
            den = v[pj[:, 0]]
            i = int(np.argmax(np.abs(den)))
            if den[i] == 0:
                break
            u[j] = (v[pj[i, 1]] / den[i]).real
        else:
            out.append(u)
    return out


# ---------------------------------------------------------------------------
# Sylvester resultant path (FEF)
# ---------------------------------------------------------------------------


def _univariate(p: NumPoly, var: int, other_value: complex) -> np.ndarray:
    """Coefficients (highest first) in ``var`` with the other variable fixed."""
    d = int(p.exps[:, var].max())
    c = np.zeros(d + 1, dtype=complex)
    for e, a in zip(p.exps, p.coefs):
        rest = np.prod([other_value ** int(v) for i, v in enumerate(e) if i != var])
        c[d - int(e[var])] += a * rest
    return c


def _sylvester_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sylvester matrix of two univariate polynomials (highest first)."""
    m, n = len(a) - 1, len(b) - 1
    S = np.zeros((m + n, m + n), dtype=np.result_type(a, b))
    for i in range(n):
        S[i, i : i + m + 1] = a
    for i in range(m):
        S[n + i, i : i + n + 1] = b
    return S


def _bivariate_table(p: NumPoly, var: int) -> np.ndarray:
    """T[i, k] = coefficient of var^i * other^k."""
    other = 1 - var
    T = np.zeros((int(p.exps[:, var].max()) + 1, int(p.exps[:, other].max()) + 1))
    for e, c in zip(p.exps, p.coefs):
        T[int(e[var]), int(e[other])] += c
    return T


def _sylvester_dets(Tp: np.ndarray, Tq: np.ndarray, zs: np.ndarray) -> np.ndarray:
    V = zs[:, None] ** np.arange(max(Tp.shape[1], Tq.shape[1]))[None, :]
    a = (V[:, : Tp.shape[1]] @ Tp.T)[:, ::-1]  # highest power of var first
    b = (V[:, : Tq.shape[1]] @ Tq.T)[:, ::-1]
    m, n = Tp.shape[0] - 1, Tq.shape[0] - 1
    S = np.zeros((len(zs), m + n, m + n), dtype=complex)
    for i in range(n):
        S[:, i, i : i + m + 1] = a
    for i in range(m):
        S[:, n + i, i : i + n + 1] = b
    return np.linalg.det(S)


_RADII = 10.0 ** np.arange(-3.0, 3.5, 0.5)


def sylvester_resultant(p: NumPoly, q: NumPoly, var: int = 0, samples: int = 64, radius=None) -> np.ndarray:
    """Res_var(p, q) as coefficients (lowest first) in the other variable.

    The determinant of the Sylvester matrix is sampled on circles and
    interpolated by FFT.  Coefficient k from the circle of radius rho
    carries an error of about eps * max_j |c_j rho^j| / rho^k, so with
    several radii each coefficient is taken from the circle where that
    bound is smallest.  This keeps resultants whose roots span many
    orders of magnitude accurate, and leaves zero coefficients near zero.
    """
    radii = _RADII if radius is None else np.atleast_1d(radius)
    Tp, Tq = _bivariate_table(p, var), _bivariate_table(q, var)
    w = np.exp(2j * np.pi * np.arange(samples) / samples)
    best = np.zeros(samples)
    bound = np.full(samples, np.inf)
    for rho in radii:
        vals = _sylvester_dets(Tp, Tq, rho * w)
        scaled = (np.fft.fft(vals) / samples).real  # c_k rho^k
        top = np.abs(scaled).max()
        if top == 0:
            continue
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            powers = rho ** np.arange(samples)
            c = scaled / powers
            err = top / powers
        upd = (err < bound) & np.isfinite(c)
        best[upd] = c[upd]
        bound[upd] = err[upd]
    return best


def _leading_resultant(p: NumPoly, q: NumPoly, var: int = 0) -> tuple:
    """Exact top coefficient of Res_var(p, q) and its natural scale.

    For polynomials of total degree m and n the coefficient of other^(mn)
    is the resultant of the top-degree forms with the other variable set
    to 1.
    """
    def top(P):
        d = P.degree()
        c = np.zeros(d + 1)
        for e, a in zip(P.exps, P.coefs):
            if int(e.sum()) == d:
                c[d - int(e[var])] += a
        return c

    a, b = top(p), top(q)
    lc = np.linalg.det(_sylvester_matrix(a, b))
    scale = np.linalg.norm(a) ** (len(b) - 1) * np.linalg.norm(b) ** (len(a) - 1)
    return float(lc.real), float(scale)


def _newton_2x2(polys: list, u: np.ndarray, iters: int = 6) -> np.ndarray:
    for _ in range(iters):
        r = np.array([p(u) for p in polys])
        J = np.array([p.gradient(u) for p in polys])
        try:
            step = np.linalg.lstsq(J, r, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        u_new = u - step
        if not np.all(np.isfinite(u_new)):
            break
        if max(p.residual(u_new) for p in polys) > max(p.residual(u) for p in polys):
            break
        u = u_new
        if np.linalg.norm(step) <= 1e-16 * (1 + np.linalg.norm(u)):
            break
    return u


def sylvester_fef(cubic, quintic, tol: Tolerances | None = None) -> list:
    """Real common roots (x, y) of the instantiated FEF cubic and quintic.

    ``Res_x`` is a degree-15 polynomial in ``y`` whose real roots come from
    companion-matrix eigenvalues.  Every real root ``x`` of the cubic at
    such a ``y`` is refined on both equations by Newton's method and kept
    if its residual passes.  The top coefficient of ``Res_x`` vanishes
    exactly when the two curves meet at infinity, which no change of
    coordinates repairs, so that case raises ``ConditioningError``.
    """
    tol = tol or Tolerances()
    pr = cubic if isinstance(cubic, NumPoly) else NumPoly.from_poly(cubic)
    qr = quintic if isinstance(quintic, NumPoly) else NumPoly.from_poly(quintic)
    expected = pr.degree() * qr.degree()
    lc, lscale = _leading_resultant(pr, qr)
    if abs(lc) <= 1e-10 * lscale:
        raise ConditioningError("cubic and quintic share a point at infinity")
    res = sylvester_resultant(pr, qr, var=0)
    res[expected] = lc
    ys = np.roots(res[: expected + 1][::-1])
    found: list = []
    for y in ys:
        if abs(y.imag) > tol.imag * (1 + abs(y.real)):
            continue
        y = y.real
        # near-coincident y roots can belong to different x, so every real
        # cubic root is refined and the survivors deduplicated
        for x in np.roots(_univariate(pr, 0, y).real):
            if abs(x.imag) > tol.imag * (1 + abs(x.real)):
                continue
            u = _newton_2x2([pr, qr], np.array([x.real, y]))
            if max(pr.residual(u), qr.residual(u)) > tol.sylvester:
                continue
            if not any(np.linalg.norm(u - w) <= 1e-6 * (1 + np.linalg.norm(u)) for w in found):
                found.append(u)
    return found


# ---------------------------------------------------------------------------
# closed-form extraction
# ---------------------------------------------------------------------------


def _entries(F: np.ndarray) -> np.ndarray:
    """3x3 block as float64, or unchanged for exact (object) entries."""
    a = np.asarray(F)
    if a.dtype != object:
        a = a.astype(np.float64)
    return a[:3, :3]


def _ratio(num, den, scale: float, tol: Tolerances, what: str):
    if isinstance(den, (float, np.floating)):
        if abs(den) <= tol.extraction * scale:
            raise ExtractionSingularError(f"{what} focal denominator vanishes")
        return float(num / den)
    if den == 0:
        raise ExtractionSingularError(f"{what} focal denominator vanishes")
    return num / den


def extract_focal_ef(F: np.ndarray, tol: Tolerances | None = None):
    """f^2 for ``E = F K`` (right camera uncalibrated).

    The rational formula is written for ``E = K G``; with ``G = F^T`` it
    applies to our convention.  Numerator and denominator are both cubic
    in the entries, so the result does not depend on the scale of F.
    Exact entries (``Fraction``) give an exact result.
    """
    tol = tol or Tolerances()
    G = _entries(F).T
    (g11, g12, g13), (g21, g22, g23), (g31, g32, g33) = G
    num = g23 * g31**2 + g23 * g32**2 - 2 * g21 * g31 * g33 - 2 * g22 * g32 * g33 - g23 * g33**2
    den = 2 * g11 * g13 * g21 + 2 * g12 * g13 * g22 - g23 * (g11**2 + g12**2 - g13**2 - g21**2 - g22**2 - g23**2)
    scale = float(np.linalg.norm(G.astype(np.float64))) ** 3
    return _ratio(num, den, scale, tol, "E+f")


def extract_focal_fef(F: np.ndarray, tol: Tolerances | None = None):
    """f^2 for ``E = K F K`` (shared unknown focal length)."""
    tol = tol or Tolerances()
    F = _entries(F)
    (f11, f12, f13), (f21, f22, f23), (f31, f32, f33) = F
    num = -(f13**2) * f32 * f33 - f23**2 * f32 * f33 + f12 * f13 * f33**2 + f22 * f23 * f33**2
    den = (
        f11 * f13 * f31 * f32 + f21 * f23 * f31 * f32 + f12 * f13 * f32**2 + f22 * f23 * f32**2
        - f11 * f12 * f31 * f33 - f21 * f22 * f31 * f33 - f12**2 * f32 * f33 - f22**2 * f32 * f33
    )
    scale = float(np.linalg.norm(F.astype(np.float64))) ** 4
    return _ratio(num, den, scale, tol, "f+E+f")


def extract_distortion(Fhat: np.ndarray, tol: Tolerances | None = None) -> float:
    """Least-squares ratio of the fourth column to the third."""
    tol = tol or Tolerances()
    Fhat = np.asarray(Fhat, dtype=np.float64)
    f3, y = Fhat[:, 2], Fhat[:, 3]
    n2 = f3 @ f3
    if n2 <= (tol.extraction * np.linalg.norm(Fhat)) ** 2 or n2 == 0:
        raise ExtractionSingularError("third column of the lifted matrix vanishes")
    return float(f3 @ y / n2)


def extend_homography(h, tol: Tolerances | None = None) -> tuple:
    """``(w, feasible)`` with ``w = 1/f > 0`` from the two column constraints.

    ``w^2 = -h7 h8 / (h1 h2 + h4 h5)``; when that denominator vanishes the
    second relation ``w^2 (h1^2 + h4^2 - h2^2 - h5^2) = h8^2 - h7^2`` is used.
    """
    tol = tol or Tolerances()
    h = np.asarray(h, dtype=np.float64).ravel()
    h1, h2, _, h4, h5, _, h7, h8, _ = h
    s = np.linalg.norm(h) ** 2
    eps = tol.extraction * 1e3 * s
    d1, n1 = h1 * h2 + h4 * h5, -h7 * h8
    d2, n2 = h1**2 + h4**2 - h2**2 - h5**2, h8**2 - h7**2
    if abs(d1) > eps:
        w2 = n1 / d1
    elif abs(n1) > eps:
        return None, False
    elif abs(d2) > eps:
        w2 = n2 / d2
    else:
        raise ExtractionSingularError("both column relations are degenerate")
    if not w2 > 0:
        return None, False
    return float(math.sqrt(w2)), True


# ---------------------------------------------------------------------------
# residuals and polishing
# ---------------------------------------------------------------------------


def epipolar_residual(pid: str, matrix: np.ndarray, corrs) -> float:
    """Max normalized |x^T F x'| (or |[u]_x H X| for Hf)."""
    a = _as_array(corrs)
    M = measurement_matrix(pid, a)
    v = _flatten(pid, matrix)
    scale = np.linalg.norm(M, axis=1) * np.linalg.norm(v)
    return float(np.max(np.abs(M @ v) / np.where(scale > 0, scale, 1.0)))


def _flatten(pid: str, matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if get_problem(pid).id == "EFK":
        return np.concatenate([m[:, :3].ravel(), m[:, 3]])
    return m.ravel()


def _polish(polys: list, u: np.ndarray, iters: int = 1) -> np.ndarray:
    for _ in range(iters):
        r = np.array([p(u) for p in polys])
        J = np.array([p.gradient(u) for p in polys])
        step = np.linalg.lstsq(J, r, rcond=None)[0]
        cand = u - step
        if np.all(np.isfinite(cand)) and max(p.residual(cand) for p in polys) <= max(p.residual(u) for p in polys):
            u = cand
    return u


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------


def _random_orthogonal(d: int, rng) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def _solve_chart(cp: CompiledProblem, L: np.ndarray, tol: Tolerances, polish: bool) -> list:
    coeffs = cp.instantiate(L)
    C = cp.fill(coeffs)
    us = action_eigensolve(C, cp.template, tol)
    polys = cp.numpolys(coeffs)
    out = []
    for u in us:
        if polish:
            u = _polish(polys, u)
        res = max(p.residual(u) for p in polys)
        out.append((u, res))
    return out


def _image_scale(pid: str, a: np.ndarray) -> float:
    """RMS radius of the image points whose calibration is unknown."""
    pts = a[:, 2:4] if pid in ("EF", "EFK") else np.vstack([a[:, :2], a[:, 2:4]])
    s = float(np.sqrt(np.mean(np.sum(pts * pts, axis=1))))
    return s if s > 0 and math.isfinite(s) else 1.0


def _scale_input(pid: str, a: np.ndarray, s: float) -> np.ndarray:
    b = a.copy()
    b[:, 2:4] /= s
    if pid == "FEF":
        b[:, :2] /= s
    return b


def _unscale(sol: PoseSolution, s: float, a: np.ndarray) -> PoseSolution:
    """Map a solution of the rescaled input back to the given coordinates.

    With x' = S x'_s and S = diag(s, s, 1): F = F_s S^-1 (and S^-1 F_s S^-1
    when both images were scaled), f = s f_s, lambda = lambda_s / s^2.
    """
    pid = sol.problem
    Si = np.diag([1 / s, 1 / s, 1.0])
    M = sol.matrix
    if pid == "FEF":
        M = Si @ M @ Si
    elif pid == "EF":
        M = M @ Si
    else:
        M = M @ np.diag([1 / s, 1 / s, 1.0, 1 / s**2])
    M = _canonical_sign(M.ravel() / np.linalg.norm(M)).reshape(M.shape)
    sol.matrix = M
    sol.focal = sol.focal * s
    if sol.lam is not None:
        sol.lam = sol.lam / s**2
    sol.residuals["epipolar"] = epipolar_residual(pid, M, a)
    if pid in ("FEF", "EF"):
        sol.residuals["det"] = float(abs(np.linalg.det(M)) / np.linalg.norm(M) ** 3)
    return sol


def solve_minimal(
    pid: str,
    corrs,
    template: SolverTemplate | None = None,
    polish: bool = False,
    tol: Tolerances | None = None,
    normalize: bool = True,
) -> list:
    """All real solutions for a minimal sample, sorted deterministically.

    With ``normalize`` the uncalibrated image coordinates are divided by
    their RMS radius before solving (the focal length and distortion scale
    accordingly and are mapped back).
    """
    tol = tol or Tolerances()
    prob = get_problem(pid)
    a = _as_array(corrs)
    if prob.id == "HF":
        return _solve_hf(nullspace_parametrize(prob.id, a, tol), a, tol)
    s = _image_scale(prob.id, a) if normalize else 1.0
    a_s = _scale_input(prob.id, a, s) if s != 1.0 else a
    param = nullspace_parametrize(prob.id, a_s, tol)
    cp = compiled_problem(prob.id, template)
    sols = []
    for res, u, v in _action_roots(cp, param.N, tol, polish):
        sol = _finish(prob.id, v, u, res, a_s, tol)
        if sol is not None:
            sols.append(_unscale(sol, s, a) if s != 1.0 else sol)
    sols.sort(key=lambda q: (q.focal if q.focal is not None else math.inf, tuple(q.unknowns)))
    return sols


_MERGE_DIST = 1e-4  # x_l distance under which roots from two charts are the same


def _action_roots(cp: CompiledProblem, N: np.ndarray, tol: Tolerances, polish: bool = False) -> list:
    """Accepted roots as ``(residual, u, x_l)`` with ``u`` in the chart of ``N``.

    The first chart is ``N`` itself.  When it yields no roots, only roots
    near its infinity, or a real root that fails the residual gate, up to
    ``tol.chart_retries`` random orthogonal re-mixings of ``N`` are tried and
    the accepted roots of all charts are merged.
    """
    rng = np.random.default_rng(0)
    d = N.shape[1]
    kept: list = []
    last_err = None
    tried = 0
    for attempt in range(tol.chart_retries + 1):
        L = N if attempt == 0 else N @ _random_orthogonal(d, rng)
        try:
            cand = _solve_chart(cp, L, tol, polish)
        except ConditioningError as exc:
            last_err = exc
            continue
        tried += 1
        clean, far = True, True
        for u, res in cand:
            hom = L @ np.append(u, 1.0)
            v = _canonical_sign(hom / np.linalg.norm(hom))
            if 1.0 / np.linalg.norm(np.append(u, 1.0)) >= tol.chart:
                far = False
            if res > tol.generator:
                clean = False
                continue
            # a root seen in an earlier chart is replaced only if better resolved
            near = [
                i for i, (_, _, w, ch) in enumerate(kept) if ch != attempt and np.linalg.norm(v - w) <= _MERGE_DIST
            ]
            if not near:
                kept.append((res, u, v, attempt))
            elif res < kept[near[0]][0]:
                kept[near[0]] = (res, u, v, attempt)
        if cand and clean and not far:
            break
    if not tried and last_err is not None:
        raise last_err
    kept.sort(key=lambda t: t[0])
    out = []
    for res, u, v, _ in kept[: cp.prob.solution_count]:
        c = N.T @ v
        base = c[:-1] / c[-1] if c[-1] != 0 else np.full(d - 1, np.inf)
        out.append((res, base, v))
    return out


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return v if v[i] >= 0 else -v


def _finish(pid: str, v: np.ndarray, u, gen_res: float, a: np.ndarray, tol: Tolerances):
    v = _canonical_sign(v)
    matrix = _to_matrix(pid, v)
    lam = None
    try:
        if pid == "FEF":
            f2 = extract_focal_fef(matrix, tol)
        else:
            f2 = extract_focal_ef(matrix[:, :3], tol)
        if pid == "EFK":
            lam = extract_distortion(matrix, tol)
    except ExtractionSingularError:
        return None
    if not (f2 > 0 and math.isfinite(f2)):
        return None
    residuals = {"generator": gen_res, "epipolar": epipolar_residual(pid, matrix, a)}
    if pid in ("FEF", "EF"):
        residuals["det"] = float(abs(np.linalg.det(matrix)) / np.linalg.norm(matrix) ** 3)
    return PoseSolution(pid, matrix, focal=math.sqrt(f2), lam=lam, unknowns=tuple(float(x) for x in u), residuals=residuals)


def hf_quartic(param: NullspaceParam) -> np.ndarray:
    """Coefficients (lowest first) of the quartic in ``y1`` for ``h = y1 n1 + n2``."""
    cp = _hf_compiled()
    coeffs = cp.instantiate(param.N)
    (poly,) = cp.numpolys(coeffs)
    c = np.zeros(5)
    for e, v in zip(poly.exps, poly.coefs):
        c[int(e[0])] += v
    return c


@lru_cache(maxsize=None)
def _hf_compiled() -> CompiledProblem:
    return CompiledProblem("HF", None)


def _solve_hf(param: NullspaceParam, a: np.ndarray, tol: Tolerances) -> list:
    c = hf_quartic(param)
    nz = np.nonzero(np.abs(c) > 1e-14 * np.abs(c).max())[0]
    roots = np.roots(c[: nz[-1] + 1][::-1]) if len(nz) else np.array([])
    sols = []
    for y in roots:
        if abs(y.imag) > tol.imag * (1 + abs(y.real)):
            continue
        y = float(y.real)
        h = param.N @ np.array([y, 1.0])
        h = _canonical_sign(h / np.linalg.norm(h))
        try:
            w, ok = extend_homography(h, tol)
        except ExtractionSingularError:
            continue
        if not ok:
            continue
        H = h.reshape(3, 3)
        res = abs(np.polyval(c[::-1], y)) / max(np.abs(c) @ np.abs(y) ** np.arange(5), 1e-300)
        sols.append(
            PoseSolution("HF", H, focal=1.0 / w, w=w, unknowns=(y,),
                         residuals={"generator": float(res), "epipolar": epipolar_residual("HF", H, a)})
        )
    sols.sort(key=lambda s: s.focal)
    return sols


def fef_roots_both_paths(corrs, tol: Tolerances | None = None, polish: bool = False) -> tuple:
    """Real (x, y) roots of one FEF sample from both solvers, same chart.

    Returns ``(action_roots, sylvester_roots)``; the action path includes its
    re-charting fallback, with roots mapped back to the chart of ``N``.
    """
    tol = tol or Tolerances()
    a = _as_array(corrs)
    a = _scale_input("FEF", a, _image_scale("FEF", a))
    param = nullspace_parametrize("FEF", a, tol)
    cp = compiled_problem("FEF")
    act = [u for _, u, _ in _action_roots(cp, param.N, tol, polish) if np.all(np.isfinite(u))]
    cubic, quintic = cp.numpolys(cp.instantiate(param.N))
    return act, sylvester_fef(cubic, quintic, tol)
