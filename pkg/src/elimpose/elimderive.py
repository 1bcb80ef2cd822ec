"""Constraint systems of the four problems and their elimination ideals.

Each problem splits its unknowns into ``x_l`` (entries of the matrix that
the image measurements constrain linearly) and ``x_n`` (focal / distortion
unknowns that only occur in the nonlinear constraints).  Deriving a problem
saturates the nonlinear constraints by the product of the ``x_n`` variables
and eliminates them, leaving generators in ``x_l`` alone.

Conventions
-----------
* ``F`` is indexed ``f11 .. f33`` row-major and the epipolar constraint is
  ``x^T F x' = 0`` with ``x`` the left and ``x'`` the right point.
* FEF: ``E = K F K``; EF and EFK: ``E = F K`` (the right camera carries the
  unknown focal length and, for EFK, the radial distortion).
* ``w = 1/f^2`` for the relative-pose problems and ``w = 1/f`` for Hf.
* ``H = [h1 h2 h3; h4 h5 h6; h7 h8 h9]``.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

from .groebner import (
    Caps,
    IdealBasis,
    buchberger,
    eliminate,
    minimal_generators,
    reduce,
    saturate,
)
from .polycore import Poly, grevlex, parse_poly

__all__ = [
    "ElimProblem",
    "PROBLEMS",
    "get_problem",
    "build_constraints",
    "derive_generators",
    "verify_reference",
    "VerificationReport",
    "load_generators",
    "save_generators",
    "format_generator_file",
    "parse_generator_file",
    "reference_polys",
    "fef_focal_constraints",
    "derive_fef_focal",
]

F_VARS = ("f11", "f12", "f13", "f21", "f22", "f23", "f31", "f32", "f33")
Y_VARS = ("y13", "y23", "y33")
H_VARS = tuple(f"h{i}" for i in range(1, 10))


@dataclass(frozen=True)
class ElimProblem:
    id: str
    ambient: tuple
    x_l: tuple
    x_n: tuple
    solution_count: int
    unknowns: tuple  # affine chart coordinates of the null-space parametrization
    n_equations: int  # linear equations contributed by the measurements
    action: str
    degree_cap: int
    builder: Callable = field(repr=False, compare=False, default=None)

    @property
    def null_dim(self) -> int:
        return len(self.x_l) - self.n_equations


def _matrix(gens, names, rows, cols):
    return [[Poly.var(gens, names[i * cols + j]) for j in range(cols)] for i in range(rows)]


def _matmul(A, B, gens):
    z = Poly.zero(gens)
    return [[sum((A[i][k] * B[k][j] for k in range(len(B))), z) for j in range(len(B[0]))] for i in range(len(A))]


def _transpose(A):
    return [list(r) for r in zip(*A)]


def det3(A) -> Poly:
    return (
        A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1])
        - A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0])
        + A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0])
    )


def _trace_constraints(gens, kind: str) -> list:
    """Nine trace-constraint entries in ``w``, with ``1/w`` powers cleared.

    With Q = diag(f^2, f^2, 1) = f^2 D, D = diag(1, 1, w):
      FEF:  2 F Q F^T Q F - tr(F Q F^T Q) F  =  f^4 (2 F D F^T D F - tr(F D F^T D) F)
      EF:   2 F Q F^T F  - tr(F Q F^T) F     =  f^2 (2 F D F^T F - tr(F D F^T) F)
    """
    F = _matrix(gens, F_VARS, 3, 3)
    one, zero, w = Poly.const(gens, 1), Poly.zero(gens), Poly.var(gens, "w")
    D = [[one, zero, zero], [zero, one, zero], [zero, zero, w]]
    FDFt = _matmul(_matmul(F, D, gens), _transpose(F), gens)
    if kind == "fef":
        left = _matmul(FDFt, D, gens)
    else:
        left = FDFt
    prod = _matmul(left, F, gens)
    tr = sum((left[i][i] for i in range(3)), zero)
    return [prod[i][j] * 2 - tr * F[i][j] for i in range(3) for j in range(3)]


def _build_fef(gens):
    F = _matrix(gens, F_VARS, 3, 3)
    return [det3(F)] + _trace_constraints(gens, "fef")


def _build_ef(gens):
    F = _matrix(gens, F_VARS, 3, 3)
    return [det3(F)] + _trace_constraints(gens, "ef")


def _build_efk(gens):
    F = _matrix(gens, F_VARS, 3, 3)
    lam = Poly.var(gens, "lam")
    lifting = [Poly.var(gens, y) - Poly.var(gens, f) * lam for y, f in zip(Y_VARS, ("f13", "f23", "f33"))]
    return lifting + [det3(F)] + _trace_constraints(gens, "ef")


def _build_hf(gens):
    w, h = Poly.var(gens, "w"), {n: Poly.var(gens, n) for n in H_VARS}
    w2 = w * w
    return [
        w2 * h["h1"] * h["h2"] + w2 * h["h4"] * h["h5"] + h["h7"] * h["h8"],
        w2 * h["h1"] ** 2 + w2 * h["h4"] ** 2 + h["h7"] ** 2 - w2 * h["h2"] ** 2 - w2 * h["h5"] ** 2 - h["h8"] ** 2,
    ]


PROBLEMS: dict = {
    "FEF": ElimProblem("FEF", ("w",) + F_VARS, F_VARS, ("w",), 15, ("x", "y"), 6, "x", 7, _build_fef),
    "EF": ElimProblem("EF", ("w",) + F_VARS, F_VARS, ("w",), 9, ("x", "y"), 6, "x", 6, _build_ef),
    "EFK": ElimProblem(
        "EFK", ("w", "lam") + F_VARS + Y_VARS, F_VARS + Y_VARS, ("w", "lam"), 19,
        ("x1", "x2", "x3", "x4"), 7, "x1", 8, _build_efk,
    ),
    "HF": ElimProblem("HF", ("w",) + H_VARS, H_VARS, ("w",), 4, ("y1",), 7, "y1", 4, _build_hf),
}


def get_problem(pid: str) -> ElimProblem:
    key = pid.upper()
    if key not in PROBLEMS:
        raise KeyError(f"unknown problem {pid!r}; expected one of {sorted(PROBLEMS)}")
    return PROBLEMS[key]


def build_constraints(pid: str) -> list:
    """The nonlinear constraint set over the problem's full ambient."""
    prob = get_problem(pid)
    return prob.builder(prob.ambient)


def derive_generators(pid: str, saturate_first: bool = True, caps: Caps | None = None) -> IdealBasis:
    """Minimal generators of the elimination ideal over ``x_l``.

    The constraints are saturated by the product of the ``x_n`` variables
    (unless ``saturate_first`` is false), the ``x_n`` variables are
    eliminated, and a minimal generating set is read off the reduced
    Gröbner basis (grevlex on ``x_l``).  The reduced basis itself is kept in
    ``.source``.
    """
    prob = get_problem(pid)
    t0 = time.perf_counter()
    polys = build_constraints(pid)
    if saturate_first:
        by = Poly.const(prob.ambient, 1)
        for v in prob.x_n:
            by = by * Poly.var(prob.ambient, v)
        polys = saturate(polys, by, caps).generators
    elim = eliminate(polys, prob.x_n, caps)
    elim = IdealBasis([g.rename(prob.x_l) for g in elim.generators], grevlex(len(prob.x_l)), True, elim.stats)
    gens = minimal_generators(elim, caps)
    order = elim.order
    gens.sort(key=lambda g: (g.degree(), order.key(g.leading_term(order)[0])))
    out = IdealBasis(gens, order, False, elim.stats)
    out.source = elim
    out.elapsed = time.perf_counter() - t0
    return out


def fef_focal_constraints() -> tuple:
    """FEF constraints written directly in ``f`` (``K = diag(f, f, 1)``).

    Returns ``(ambient, polys)``.  Unlike the ``w`` form, the degenerate
    component ``f = 0`` is a genuine component here, so eliminating ``f``
    without saturating first gives a strictly smaller ideal.
    """
    gens = ("f",) + F_VARS
    F = _matrix(gens, F_VARS, 3, 3)
    f, one, z = Poly.var(gens, "f"), Poly.const(gens, 1), Poly.zero(gens)
    K = [[f, z, z], [z, f, z], [z, z, one]]
    E = _matmul(_matmul(K, F, gens), K, gens)
    EEt = _matmul(E, _transpose(E), gens)
    P = _matmul(EEt, E, gens)
    tr = sum((EEt[i][i] for i in range(3)), z)
    return gens, [det3(E)] + [P[i][j] * 2 - tr * E[i][j] for i in range(3) for j in range(3)]


def derive_fef_focal(saturate_first: bool = True, caps: Caps | None = None) -> IdealBasis:
    """Reduced grevlex basis of the FEF elimination ideal from the ``f`` form."""
    gens, polys = fef_focal_constraints()
    if saturate_first:
        polys = saturate(polys, Poly.var(gens, "f"), caps).generators
    elim = eliminate(polys, ("f",), caps)
    return IdealBasis([g.rename(F_VARS) for g in elim.generators], grevlex(9), True, elim.stats)


# ---------------------------------------------------------------------------
# golden generator files
# ---------------------------------------------------------------------------

_HEADER = "# elimpose generators v1"


def format_generator_file(pid: str, generators: list) -> str:
    prob = get_problem(pid)
    order = grevlex(len(prob.x_l))
    lines = [_HEADER, f"# problem: {prob.id}", f"# variables: {','.join(prob.x_l)}", "# order: grevlex"]
    lines += [g.content_normalized(order).to_text(order) for g in generators]
    return "\n".join(lines) + "\n"


def parse_generator_file(text: str) -> tuple:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise ValueError("not an elimpose generator file")
    meta = {}
    body = []
    for ln in lines[1:]:
        if ln.startswith("#"):
            k, _, v = ln[1:].partition(":")
            meta[k.strip()] = v.strip()
        else:
            body.append(ln)
    gens = tuple(meta["variables"].split(","))
    return meta["problem"], [parse_poly(b, gens) for b in body]


def save_generators(pid: str, generators: list, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_generator_file(pid, generators))


def load_generators(pid: str, path=None) -> list:
    """Generators from ``path`` or from the copy bundled with the package."""
    if path is None:
        text = resources.files("elimpose.data").joinpath(f"{pid.lower()}.gens").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    prob_id, gens = parse_generator_file(text)
    if prob_id != get_problem(pid).id:
        raise ValueError(f"file holds generators for {prob_id}, not {pid}")
    return gens


# ---------------------------------------------------------------------------
# reference polynomials as printed, and verification
# ---------------------------------------------------------------------------

_QUINTIC = (
    "f11*f13^3*f31 + f13^2*f21*f23*f31 + f11*f13*f23^2*f31 + f21*f23^3*f31"
    " - f11*f13*f31^3 - f21*f23*f31^3 + f12*f13^3*f32 + f13^2*f22*f23*f32"
    " + f12*f13*f23^2*f32 + f22*f23^3*f32 - f12*f13*f31^2*f32 - f12^2*f13^2*f33"
    " - f11*f13*f31*f32^2 - f21*f23*f31*f32^2 - f12*f13*f32^3 - f22*f23*f32^3"
    " - f11^2*f13^2*f33 - f22*f23*f31^2*f32 - 2*f11*f13*f21*f23*f33"
    " - 2*f12*f13*f22*f23*f33 - f21^2*f23^2*f33 - f22^2*f23^2*f33"
    " + f11^2*f31^2*f33 + f21^2*f31^2*f33 + 2*f11*f12*f31*f32*f33"
    " + 2*f21*f22*f31*f32*f33 + f12^2*f32^2*f33 + f22^2*f32^2*f33"
)

_HF_QUARTIC = (
    "h1*h2*h7^2 + h4*h5*h7^2 - h1^2*h7*h8 + h2^2*h7*h8"
    " - h4^2*h7*h8 + h5^2*h7*h8 - h1*h2*h8^2 - h4*h5*h8^2"
)


def _ef_minors(transposed: bool) -> list:
    """Maximal minors of the 3x4 matrix [F | c] with
    c = (r2·r3, -(r1·r3), 0), r_i the rows of F.

    As printed, this matrix describes ``E = K F``.  Our EF convention is
    ``E = F K``, which is the same statement for ``F^T``; ``transposed``
    builds it from ``F^T``.
    """
    g = F_VARS
    F = _matrix(g, F_VARS, 3, 3)
    if transposed:
        F = _transpose(F)
    r1, r2, r3 = F
    dot = lambda a, b: sum((x * y for x, y in zip(a, b)), Poly.zero(g))
    col = [dot(r2, r3), -dot(r1, r3), Poly.zero(g)]
    M = [F[i] + [col[i]] for i in range(3)]
    return [det3([[M[i][j] for j in cols] for i in range(3)]) for cols in itertools.combinations(range(4), 3)]


def reference_polys(pid: str) -> dict:
    """Reference polynomials for ``pid`` keyed by a short name."""
    pid = get_problem(pid).id
    if pid == "FEF":
        F = _matrix(F_VARS, F_VARS, 3, 3)
        return {"cubic det F": det3(F), "quintic": parse_poly(_QUINTIC, F_VARS)}
    if pid == "EF":
        return {f"minor {i + 1}": m for i, m in enumerate(_ef_minors(transposed=True))}
    if pid == "EFK":
        gens = F_VARS + Y_VARS
        out = {}
        for i, j in ((1, 2), (1, 3), (2, 3)):
            out[f"quadric f{i}3*y{j}3 - f{j}3*y{i}3"] = Poly.var(gens, f"f{i}3") * Poly.var(gens, f"y{j}3") - Poly.var(
                gens, f"f{j}3"
            ) * Poly.var(gens, f"y{i}3")
        return out
    return {"quartic": parse_poly(_HF_QUARTIC, H_VARS)}


@dataclass
class VerificationReport:
    problem: str
    checks: list = field(default_factory=list)  # (name, passed, detail)

    @property
    def ok(self) -> bool:
        return all(p for _, p, _ in self.checks)

    def add(self, name: str, passed: bool, detail: str = ""):
        self.checks.append((name, bool(passed), detail))

    def failures(self) -> list:
        return [c for c in self.checks if not c[1]]

    def to_text(self) -> str:
        lines = [f"verification {self.problem}: {'OK' if self.ok else 'MISMATCH'}"]
        for name, passed, detail in self.checks:
            lines.append(f"  [{'pass' if passed else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
        return "\n".join(lines)


def _degree_census(gens: list) -> dict:
    census: dict = {}
    for g in gens:
        census[g.degree()] = census.get(g.degree(), 0) + 1
    return census


def verify_reference(pid: str, generators: list | None = None) -> VerificationReport:
    """Compare derived (or supplied) generators with the printed references."""
    prob = get_problem(pid)
    if generators is None:
        generators = derive_generators(pid).generators
    rep = VerificationReport(prob.id)
    refs = reference_polys(pid)
    order = grevlex(len(prob.x_l))
    stray = [g for g in generators if g.support() & set(prob.x_n)]
    rep.add("no eliminated variable occurs", not stray)
    census = _degree_census(generators)

    if prob.id in ("FEF", "HF"):
        expected = {"FEF": {3: 1, 5: 1}, "HF": {4: 1}}[prob.id]
        rep.add("degree census", census == expected, f"got {census}, expected {expected}")
        for name, ref in refs.items():
            hit = any(g.is_scalar_multiple(ref) for g in generators)
            rep.add(f"{name} reproduced up to scalar", hit, "" if hit else "no generator matches")
    elif prob.id == "EF":
        rep.add("degree census", census == {3: 1, 4: 3}, f"got {census}")
        derived_gb = buchberger(generators, order)
        minors = list(refs.values())
        minors_gb = buchberger(minors, order)
        for name, m in refs.items():
            rep.add(f"{name} in derived ideal", reduce(m, derived_gb).is_zero())
        for k, g in enumerate(generators):
            rep.add(f"generator {k + 1} (deg {g.degree()}) in minors ideal", reduce(g, minors_gb).is_zero())
    else:
        rep.add("degree census", census == {2: 3, 3: 2, 4: 9}, f"got {census}")
        rep.add("generator count", len(generators) == 14, f"got {len(generators)}")
        quadrics = [g for g in generators if g.degree() == 2]
        for name, ref in refs.items():
            hit = any(g.is_scalar_multiple(ref) for g in quadrics)
            rep.add(f"{name} among quadrics", hit)
    return rep
