"""Action-matrix elimination templates built from the derived generators.

A template is a list of (generator, multiplier monomial) rows over the
dehomogenized null-space unknowns.  Its columns are ordered excessive
monomials first, then the reducible monomials ``action * b`` that fall
outside the quotient basis, then the basis itself.  After Gauss-Jordan
elimination of a filled template, the rows pivoted on reducible columns
express ``action * b`` in the basis, which is all the action matrix needs.

Construction is offline and exact: candidate rows are all multiples of the
generators up to a degree cap, closure is tested and rows are pruned over a
prime field, and the result is re-verified over the rationals on fresh
random instances.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import gmpy2
import numpy as np

from .elimderive import get_problem, load_generators
from .groebner import Caps, buchberger, reduce
from .polycore import Poly, grevlex, monomials_up_to_degree

__all__ = [
    "SolverTemplate",
    "TemplateError",
    "TemplateFormatError",
    "TemplateVersionError",
    "TEMPLATE_VERSION",
    "exact_nullspace",
    "random_exact_instance",
    "quotient_basis",
    "build_template",
    "check_closure_exact",
    "exact_action_matrix",
    "save_template",
    "load_template",
    "template_to_json",
    "template_from_json",
]

TEMPLATE_VERSION = 1
PRIME = 2_147_483_647  # 2^31 - 1; products of residues fit in int64
MAX_RETRIES = 5


class TemplateError(RuntimeError):
    pass


class TemplateFormatError(ValueError):
    pass


class TemplateVersionError(TemplateFormatError):
    pass


@dataclass
class SolverTemplate:
    problem: str
    unknowns: tuple
    action: str
    multipliers: list  # (generator index, monomial) per row
    monomials: list  # column order: excessive, reducible, basis
    basis: list
    n_excessive: int
    n_reducible: int
    degree_cap: int = 0
    seed: int = 0
    version: int = TEMPLATE_VERSION
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def rows(self) -> int:
        return len(self.multipliers)

    @property
    def cols(self) -> int:
        return len(self.monomials)

    @property
    def shape(self) -> tuple:
        return (self.rows, self.cols)

    @property
    def action_index(self) -> int:
        return self.unknowns.index(self.action)

    @property
    def reducible(self) -> list:
        return self.monomials[self.n_excessive : self.n_excessive + self.n_reducible]

    @property
    def column_index(self) -> dict:
        idx = self._cache.get("column_index")
        if idx is None:
            idx = {m: i for i, m in enumerate(self.monomials)}
            self._cache["column_index"] = idx
        return idx

    def action_rows(self) -> list:
        """For each basis monomial b: ('basis', j) if action*b is basis
        monomial j, else ('reducible', k) for reducible column k."""
        a = self.action_index
        bpos = {m: j for j, m in enumerate(self.basis)}
        rpos = {m: k for k, m in enumerate(self.reducible)}
        out = []
        for b in self.basis:
            ab = b[:a] + (b[a] + 1,) + b[a + 1 :]
            out.append(("basis", bpos[ab]) if ab in bpos else ("reducible", rpos[ab]))
        return out


# ---------------------------------------------------------------------------
# exact random instances
# ---------------------------------------------------------------------------


def exact_nullspace(rows: list) -> list:
    """Basis of the right null space of a rational matrix (list of columns)."""
    A = [[Fraction(v) for v in r] for r in rows]
    m, n = len(A), len(A[0]) if A else 0
    pivots = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = 1 / A[r][c]
        A[r] = [v * inv for v in A[r]]
        for i in range(m):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * n
        v[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -A[i][fc]
        basis.append(v)
    return basis


def random_exact_instance(pid: str, seed: int, generators: list | None = None) -> list:
    """Generators instantiated on a random exact null-space parametrization.

    A random integer measurement matrix is drawn, its exact null space is
    mixed by a random integer matrix (so the chart is not tied to any
    coordinate), and ``x_l = N (u_1, ..., u_k, 1)`` is substituted.
    """
    prob = get_problem(pid)
    gens = generators if generators is not None else load_generators(pid)
    rng = random.Random(seed)
    n, k = len(prob.x_l), prob.n_equations
    U = prob.unknowns
    for _ in range(MAX_RETRIES):
        M = [[rng.randint(-9, 9) for _ in range(n)] for _ in range(k)]
        null = exact_nullspace(M)
        if len(null) != n - k:
            continue
        d = len(null)
        mix = [[rng.randint(-5, 5) for _ in range(d)] for _ in range(d)]
        cols = [[sum(mix[j][i] * null[j][t] for j in range(d)) for t in range(n)] for i in range(d)]
        if any(all(v == 0 for v in c) for c in cols):
            continue
        assign = {}
        for t, name in enumerate(prob.x_l):
            terms = {(0,) * len(U): cols[-1][t]}
            for j in range(len(U)):
                e = [0] * len(U)
                e[j] = 1
                terms[tuple(e)] = cols[j][t]
            assign[name] = Poly(U, terms)
        return [g.substitute_linear(assign, U) for g in gens]
    raise TemplateError(f"could not draw a generic instance for {prob.id}")


def quotient_basis(pid: str, seed: int = 0, generators: list | None = None, caps: Caps | None = None) -> list:
    """Standard monomials (grevlex) of a random exact instance.

    Their number is the number of solutions.  A count other than the
    problem's is taken as a degenerate draw and retried with the next seed.
    """
    prob = get_problem(pid)
    order = grevlex(len(prob.unknowns))
    seen = []
    for attempt in range(MAX_RETRIES):
        inst = random_exact_instance(pid, seed + 7919 * attempt, generators)
        gb = buchberger(inst, order, caps)
        try:
            sm = gb.standard_monomials()
        except ValueError:
            sm = None
        if sm is not None and len(sm) == prob.solution_count:
            return sm
        seen.append(None if sm is None else len(sm))
    raise TemplateError(f"{prob.id}: quotient basis size {seen} != {prob.solution_count} after {MAX_RETRIES} draws")


# ---------------------------------------------------------------------------
# linear algebra over F_p and Q
# ---------------------------------------------------------------------------


def _rank_mod_p(A: np.ndarray, p: int = PRIME) -> int:
    A = np.array(A, dtype=np.int64) % p
    m, n = A.shape
    r = 0
    for c in range(n):
        if r == m:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        inv = pow(int(A[r, c]), p - 2, p)
        A[r] = (A[r] * inv) % p
        below = np.nonzero(A[r + 1 :, c])[0] + r + 1
        if below.size:
            f = A[below, c][:, None]
            A[below] = (A[below] - f * A[r][None, :]) % p
        r += 1
    return r


def _bareiss_rank(rows: list) -> int:
    """Exact rank by fraction-free elimination on integer rows."""
    A = [[gmpy2.mpz(v) for v in r] for r in rows]
    m = len(A)
    n = len(A[0]) if m else 0
    r = 0
    prev = gmpy2.mpz(1)
    for c in range(n):
        if r == m:
            break
        piv = next((i for i in range(r, m) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        pr = A[r]
        for i in range(r + 1, m):
            row = A[i]
            a = row[c]
            A[i] = [(pr[c] * row[j] - a * pr[j]) // prev for j in range(n)]
        prev = pr[c]
        r += 1
    return r


def _integer_rows(rows: list) -> list:
    out = []
    for r in rows:
        den = 1
        for v in r:
            den = gmpy2.lcm(den, gmpy2.mpq(v).denominator)
        out.append([int(gmpy2.mpq(v) * den) for v in r])
    return out


def _mod_p(v: Fraction, p: int = PRIME) -> int:
    den = v.denominator % p
    if den == 0:
        raise ZeroDivisionError("denominator vanishes modulo p")
    return (v.numerator % p) * pow(den, p - 2, p) % p


# ---------------------------------------------------------------------------
# template construction
# ---------------------------------------------------------------------------


def _row_terms(inst: list, mult: tuple) -> dict:
    gi, m = mult
    return {tuple(a + b for a, b in zip(mono, m)): c for mono, c in inst[gi].terms.items()}


def _column_partition(monos: set, basis: list, action_index: int, order) -> tuple:
    bset = set(basis)
    red = set()
    for b in basis:
        ab = b[:action_index] + (b[action_index] + 1,) + b[action_index + 1 :]
        if ab not in bset:
            red.add(ab)
    exc = monos - red - bset
    desc = lambda s: sorted(s, key=order.key, reverse=True)
    return desc(exc), desc(red), desc(bset)


def _closure_mod_p(inst_p: list, mults: list, basis: list, action_index: int, order) -> bool:
    monos = set()
    for mu in mults:
        monos.update(_row_terms(inst_p, mu))
    exc, red, bas = _column_partition(monos, basis, action_index, order)
    if not set(red) <= monos:
        return False
    cols = {m: i for i, m in enumerate(exc + red + bas)}
    A = np.zeros((len(mults), len(cols)), dtype=np.int64)
    for i, mu in enumerate(mults):
        for m, c in _row_terms(inst_p, mu).items():
            A[i, cols[m]] = c
    ne, nr = len(exc), len(red)
    return _rank_mod_p(A[:, : ne + nr]) == _rank_mod_p(A[:, :ne]) + nr


def _candidate_rows(inst: list, nvars: int, cap: int) -> list:
    rows = []
    for gi, g in enumerate(inst):
        d = g.degree()
        for m in monomials_up_to_degree(nvars, cap - d):
            rows.append((gi, tuple(m)))
    return rows


def _reduce_mod_p(inst: list) -> list:
    return [Poly._raw(g.gens, {m: _mod_p(c) for m, c in g.terms.items()}) for g in inst]


def build_template(
    pid: str,
    action: str | None = None,
    seed: int = 0,
    cap: int | None = None,
    n_verify: int = 3,
    prune: bool = True,
) -> SolverTemplate:
    """Smallest-found template whose G-J form yields the action matrix.

    The degree cap grows from the largest generator degree up to ``cap``
    (the problem default if omitted) until closure holds; rows are then
    pruned greedily, highest multiplier degree first.
    """
    prob = get_problem(pid)
    U = prob.unknowns
    action = action or prob.action
    if action not in U:
        raise TemplateError(f"action variable {action!r} not among {U}")
    ai = U.index(action)
    order = grevlex(len(U))
    gens = load_generators(pid)
    basis = quotient_basis(pid, seed, gens)
    inst_p = _reduce_mod_p(random_exact_instance(pid, seed + 1, gens))
    max_cap = cap if cap is not None else prob.degree_cap
    start = max(g.degree() for g in gens)
    mults = None
    for c in range(start, max_cap + 1):
        cand = _candidate_rows(inst_p, len(U), c)
        if _closure_mod_p(inst_p, cand, basis, ai, order):
            mults, used_cap = cand, c
            break
    if mults is None:
        raise TemplateError(f"{prob.id}: closure not reached up to degree {max_cap}")
    if prune:
        by_degree = sorted(range(len(mults)), key=lambda i: (-sum(mults[i][1]), -i))
        keep = list(mults)
        for i in by_degree:
            trial = [m for m in keep if m != mults[i]]
            if _closure_mod_p(inst_p, trial, basis, ai, order):
                keep = trial
        mults = keep
    monos = set()
    for mu in mults:
        monos.update(_row_terms(inst_p, mu))
    exc, red, bas = _column_partition(monos, basis, ai, order)
    tpl = SolverTemplate(
        prob.id, U, action, mults, exc + red + bas, bas, len(exc), len(red), used_cap, seed
    )
    for k in range(n_verify):
        inst = random_exact_instance(pid, seed + 101 + k, gens)
        if not check_closure_exact(tpl, inst):
            raise TemplateError(f"{prob.id}: template failed exact closure on verification instance {k}")
    return tpl


def fill_exact(tpl: SolverTemplate, inst: list) -> list:
    idx = tpl.column_index
    rows = []
    for mu in tpl.multipliers:
        r = [Fraction(0)] * tpl.cols
        for m, c in _row_terms(inst, mu).items():
            if m not in idx:
                raise TemplateError(f"monomial {m} missing from template columns")
            r[idx[m]] = c
        rows.append(r)
    return rows


def check_closure_exact(tpl: SolverTemplate, inst: list) -> bool:
    """rank[E R] == rank E + |R| over Q on the given instance."""
    rows = _integer_rows(fill_exact(tpl, inst))
    ne, nr = tpl.n_excessive, tpl.n_reducible
    rank_e = _bareiss_rank([r[:ne] for r in rows]) if ne else 0
    rank_er = _bareiss_rank([r[: ne + nr] for r in rows])
    return rank_er == rank_e + nr


def exact_action_matrix(tpl: SolverTemplate, inst: list) -> list:
    """Action matrix over Q via exact G-J of the filled template.

    Row j holds the coefficients of ``action * basis[j]`` in the basis.
    """
    A = [[gmpy2.mpq(v) for v in r] for r in fill_exact(tpl, inst)]
    m, n = len(A), tpl.cols
    pivot_row = {}
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = 1 / A[r][c]
        A[r] = [v * inv for v in A[r]]
        for i in range(m):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivot_row[c] = r
        r += 1
    ne, nr, nb = tpl.n_excessive, tpl.n_reducible, len(tpl.basis)
    out = []
    for kind, j in tpl.action_rows():
        row = [gmpy2.mpq(0)] * nb
        if kind == "basis":
            row[j] = gmpy2.mpq(1)
        else:
            c = ne + j
            if c not in pivot_row:
                raise TemplateError("reducible column without pivot")
            pr = A[pivot_row[c]]
            row = [-pr[ne + nr + t] for t in range(nb)]
        out.append(row)
    return out


def groebner_action_matrix(tpl: SolverTemplate, inst: list) -> list:
    """Same matrix from Gröbner normal forms; independent of the template rows."""
    order = grevlex(len(tpl.unknowns))
    gb = buchberger(inst, order)
    U = tpl.unknowns
    ai = tpl.action_index
    bpos = {m: j for j, m in enumerate(tpl.basis)}
    out = []
    for b in tpl.basis:
        ab = b[:ai] + (b[ai] + 1,) + b[ai + 1 :]
        nf = reduce(Poly(U, {ab: 1}), gb, order)
        row = [gmpy2.mpq(0)] * len(tpl.basis)
        for m, c in nf.terms.items():
            if m not in bpos:
                raise TemplateError(f"normal form leaves the basis at {m}")
            row[bpos[m]] = gmpy2.mpq(c.numerator, c.denominator)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def template_to_json(tpl: SolverTemplate) -> str:
    doc = {
        "version": tpl.version,
        "problem": tpl.problem,
        "rows": tpl.rows,
        "cols": tpl.cols,
        "unknowns": list(tpl.unknowns),
        "action": tpl.action,
        "degree_cap": tpl.degree_cap,
        "seed": tpl.seed,
        "partition": {"excessive": tpl.n_excessive, "reducible": tpl.n_reducible, "basis": len(tpl.basis)},
        "multipliers": [[gi, list(m)] for gi, m in tpl.multipliers],
        "monomials": [list(m) for m in tpl.monomials],
        "basis": [list(m) for m in tpl.basis],
    }
    return json.dumps(doc, indent=1) + "\n"


def template_from_json(text: str) -> SolverTemplate:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TemplateFormatError(f"malformed template file: {exc}") from None
    if not isinstance(doc, dict) or "version" not in doc:
        raise TemplateFormatError("template file lacks a version field")
    if doc["version"] != TEMPLATE_VERSION:
        raise TemplateVersionError(f"template version {doc['version']!r}, expected {TEMPLATE_VERSION}")
    try:
        part = doc["partition"]
        tpl = SolverTemplate(
            problem=doc["problem"],
            unknowns=tuple(doc["unknowns"]),
            action=doc["action"],
            multipliers=[(int(gi), tuple(m)) for gi, m in doc["multipliers"]],
            monomials=[tuple(m) for m in doc["monomials"]],
            basis=[tuple(m) for m in doc["basis"]],
            n_excessive=int(part["excessive"]),
            n_reducible=int(part["reducible"]),
            degree_cap=int(doc.get("degree_cap", 0)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TemplateFormatError(f"malformed template file: {exc!r}") from None
    if tpl.rows != doc["rows"] or tpl.cols != doc["cols"]:
        raise TemplateFormatError("rows/cols do not match the listed multipliers/monomials")
    if tpl.monomials[tpl.cols - len(tpl.basis) :] != tpl.basis:
        raise TemplateFormatError("basis monomials must be the last columns")
    if tpl.n_excessive + tpl.n_reducible + len(tpl.basis) != tpl.cols:
        raise TemplateFormatError("column partition does not add up")
    return tpl


def save_template(tpl: SolverTemplate, path) -> None:
    with open(path, "w") as fh:
        fh.write(template_to_json(tpl))


def load_template(pid_or_path: str, path=None) -> SolverTemplate:
    """Load from ``path``, or the bundled template for a problem id."""
    if path is None and str(pid_or_path).upper() in ("FEF", "EF", "EFK", "HF"):
        text = resources.files("elimpose.data").joinpath(f"{pid_or_path.lower()}.template.json").read_text()
    else:
        with open(path or pid_or_path) as fh:
            text = fh.read()
    return template_from_json(text)
