"""Exact multivariate polynomials over the rationals.

Monomials are plain exponent tuples over an ordered variable list (the
*ambient*).  Polynomials are immutable; every arithmetic result is stored
without zero terms, so two polynomials over the same ambient are equal
exactly when their term maps are equal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce as _fold
from math import gcd
from typing import Iterable, Mapping, Sequence

Monomial = tuple  # tuple[int, ...], one exponent per ambient variable

__all__ = [
    "Monomial",
    "MonomialOrder",
    "Poly",
    "AmbientError",
    "compare",
    "lex",
    "grevlex",
    "block_order",
    "parse_poly",
    "format_poly",
    "monomials_up_to_degree",
]


class AmbientError(ValueError):
    """Operands live over different variable lists."""


# ---------------------------------------------------------------------------
# monomial orders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonomialOrder:
    """A monomial order on ``nvars`` variables.

    ``kind`` is ``"lex"``, ``"grevlex"`` or ``"block"``.  A block order
    compares the first ``block`` variables (after applying ``priority``) by
    grevlex and breaks ties by grevlex on the remaining ones, so every
    monomial containing a front-block variable beats every monomial free of
    them.  ``priority`` lists variable indices from most to least significant.
    """

    kind: str
    nvars: int
    block: int = 0
    priority: tuple = ()

    def __post_init__(self):
        if self.kind not in ("lex", "grevlex", "block"):
            raise ValueError(f"unknown order kind {self.kind!r}")
        prio = tuple(self.priority) if self.priority else tuple(range(self.nvars))
        if sorted(prio) != list(range(self.nvars)):
            raise ValueError("priority must be a permutation of the variables")
        object.__setattr__(self, "priority", prio)
        if self.kind == "block" and not 0 < self.block < self.nvars:
            raise ValueError("block size must split the variables")

    def weight_rows(self) -> list[list[int]]:
        """Integer matrix W such that a < b iff W·a < W·b lexicographically.

        Rows are non-negative, which the packed representation in
        :mod:`elimpose.groebner` relies on.
        """
        n, p = self.nvars, self.priority

        def grevlex_rows(idx):
            rows = []
            # total degree, then prefix sums e_1+..+e_{k}, k = len-1 .. 1
            for k in range(len(idx), 0, -1):
                row = [0] * n
                for i in idx[:k]:
                    row[i] = 1
                rows.append(row)
            return rows

        if self.kind == "lex":
            rows = []
            for i in p:
                row = [0] * n
                row[i] = 1
                rows.append(row)
            return rows
        if self.kind == "grevlex":
            return grevlex_rows(list(p))
        return grevlex_rows(list(p[: self.block])) + grevlex_rows(list(p[self.block :]))

    def key(self, m: Sequence[int]) -> tuple:
        """Sort key: ascending keys follow the ascending order."""
        return tuple(sum(w * e for w, e in zip(row, m) if w) for row in self.weight_rows_cached)

    @property
    def weight_rows_cached(self):
        rows = self.__dict__.get("_rows")
        if rows is None:
            rows = self.weight_rows()
            object.__setattr__(self, "_rows", rows)
        return rows


def lex(nvars: int, priority: Sequence[int] = ()) -> MonomialOrder:
    return MonomialOrder("lex", nvars, 0, tuple(priority))


def grevlex(nvars: int, priority: Sequence[int] = ()) -> MonomialOrder:
    return MonomialOrder("grevlex", nvars, 0, tuple(priority))


def block_order(nvars: int, front: Iterable[int]) -> MonomialOrder:
    """Elimination order with the variables ``front`` greatest."""
    front = sorted(set(front))
    rest = [i for i in range(nvars) if i not in front]
    return MonomialOrder("block", nvars, len(front), tuple(front + rest))


def compare(order: MonomialOrder, a: Sequence[int], b: Sequence[int]) -> int:
    """Return -1, 0 or 1 as ``a`` is below, equal to or above ``b``."""
    if len(a) != len(b) or len(a) != order.nvars:
        raise AmbientError("monomials and order must share the ambient")
    ka, kb = order.key(a), order.key(b)
    return (ka > kb) - (ka < kb)


def monomials_up_to_degree(nvars: int, degree: int) -> list[tuple]:
    """All exponent tuples of total degree <= ``degree`` (unordered)."""
    out = []

    def rec(prefix, left, i):
        if i == nvars - 1:
            for e in range(left + 1):
                out.append(tuple(prefix + [e]))
            return
        for e in range(left + 1):
            rec(prefix + [e], left - e, i + 1)

    if nvars == 0:
        return [()]
    rec([], degree, 0)
    return out


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------


def _to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    # gmpy2.mpq / mpz and other rationals expose numerator/denominator
    try:
        return Fraction(int(c.numerator), int(c.denominator))
    except AttributeError:
        raise TypeError(f"coefficient {c!r} is not an exact rational") from None


class Poly:
    """Polynomial with exact rational coefficients over a named ambient."""

    __slots__ = ("gens", "terms", "_hash")

    def __init__(self, gens: Sequence[str], terms: Mapping[tuple, object] | None = None):
        self.gens = tuple(gens)
        n = len(self.gens)
        clean = {}
        for m, c in (terms or {}).items():
            m = tuple(int(e) for e in m)
            if len(m) != n:
                raise AmbientError(f"monomial {m} does not match {n} variables")
            if any(e < 0 for e in m):
                raise ValueError("negative exponent")
            c = _to_fraction(c)
            if c:
                clean[m] = clean.get(m, 0) + c
                if not clean[m]:
                    del clean[m]
        self.terms = clean
        self._hash = None

    # construction helpers ---------------------------------------------------

    @classmethod
    def _raw(cls, gens: tuple, terms: dict) -> "Poly":
        p = object.__new__(cls)
        p.gens = gens
        p.terms = terms
        p._hash = None
        return p

    @classmethod
    def var(cls, gens: Sequence[str], name: str) -> "Poly":
        gens = tuple(gens)
        i = gens.index(name)
        m = [0] * len(gens)
        m[i] = 1
        return cls._raw(gens, {tuple(m): Fraction(1)})

    @classmethod
    def const(cls, gens: Sequence[str], c) -> "Poly":
        gens = tuple(gens)
        c = _to_fraction(c)
        return cls._raw(gens, {(0,) * len(gens): c} if c else {})

    @classmethod
    def zero(cls, gens: Sequence[str]) -> "Poly":
        return cls._raw(tuple(gens), {})

    def vars(self) -> list["Poly"]:
        return [Poly.var(self.gens, g) for g in self.gens]

    # basic queries ----------------------------------------------------------

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.gens == other.gens and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Poly.const(self.gens, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.gens, frozenset(self.terms.items())))
        return self._hash

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self.terms), default=-1)

    def degree_in(self, name: str) -> int:
        i = self.gens.index(name)
        return max((m[i] for m in self.terms), default=-1)

    def support(self) -> set[str]:
        """Names of variables that actually occur."""
        used = set()
        for m in self.terms:
            used.update(g for g, e in zip(self.gens, m) if e)
        return used

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self.terms}) <= 1

    def leading_term(self, order: MonomialOrder) -> tuple[tuple, Fraction]:
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        m = max(self.terms, key=order.key)
        return m, self.terms[m]

    def sorted_terms(self, order: MonomialOrder) -> list[tuple[tuple, Fraction]]:
        """Terms in descending order."""
        return sorted(self.terms.items(), key=lambda t: order.key(t[0]), reverse=True)

    # arithmetic -------------------------------------------------------------

    def _check(self, other: "Poly"):
        if self.gens != other.gens:
            raise AmbientError(f"ambient mismatch: {self.gens} vs {other.gens}")

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            self._check(other)
            return other
        return Poly.const(self.gens, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Poly._raw(self.gens, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self.gens, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        self._check(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                v = out.get(m, 0) + c1 * c2
                if v:
                    out[m] = v
                else:
                    out.pop(m, None)
        return Poly._raw(self.gens, out)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, c) -> "Poly":
        c = _to_fraction(c)
        if not c:
            return Poly.zero(self.gens)
        return Poly._raw(self.gens, {m: v * c for m, v in self.terms.items()})

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = Poly.const(self.gens, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def mul_monomial(self, m: Sequence[int], c=1) -> "Poly":
        c = _to_fraction(c)
        return Poly._raw(
            self.gens,
            {tuple(a + b for a, b in zip(t, m)): v * c for t, v in self.terms.items()} if c else {},
        )

    # evaluation and substitution --------------------------------------------

    def evaluate(self, point: Mapping[str, object] | Sequence):
        """Evaluate at a point given as a sequence or a name -> value map.

        Works for any coefficient ring that mixes with ``Fraction`` (exact
        rationals, floats, complex, numpy scalars).
        """
        if isinstance(point, Mapping):
            vals = [point[g] for g in self.gens]
        else:
            vals = list(point)
            if len(vals) != len(self.gens):
                raise AmbientError("point dimension does not match ambient")
        total = 0
        for m, c in self.terms.items():
            t = c
            for v, e in zip(vals, m):
                if e:
                    t = t * v**e
            total = total + t
        return total

    def evaluate_float(self, point) -> float:
        if isinstance(point, Mapping):
            vals = [float(point[g]) for g in self.gens]
        else:
            vals = [float(v) for v in point]
        total = 0.0
        for m, c in self.terms.items():
            t = float(c)
            for v, e in zip(vals, m):
                if e:
                    t *= v**e
            total += t
        return total

    def substitute_linear(
        self, assignment: Mapping[str, "Poly"], new_gens: Sequence[str] | None = None
    ) -> "Poly":
        """Replace variables by affine-linear polynomials.

        ``assignment`` maps each replaced variable name to a polynomial of
        degree <= 1 over ``new_gens``.  Variables of ``self`` that are not
        replaced must also appear in ``new_gens``; they are carried over.
        If ``new_gens`` is omitted the ambient of the first assigned value is
        used.
        """
        if not assignment:
            raise ValueError("empty assignment")
        vals = list(assignment.values())
        target = tuple(new_gens) if new_gens is not None else vals[0].gens
        for name, v in assignment.items():
            if name not in self.gens:
                raise AmbientError(f"{name} is not a variable of this polynomial")
            if v.gens != target:
                raise AmbientError("assigned polynomials must share the target ambient")
            if v.degree() > 1:
                raise ValueError(f"assignment for {name} is not affine-linear")
        images = []
        for g in self.gens:
            if g in assignment:
                images.append(assignment[g])
            elif g in target:
                images.append(Poly.var(target, g))
            else:
                images.append(None)
        used = self.support()
        missing = [g for g, im in zip(self.gens, images) if im is None and g in used]
        if missing:
            raise KeyError(f"assignment does not cover {missing}")

        # powers are cached per variable; terms share them
        cache: dict = {}

        def power(i, e):
            key = (i, e)
            if key not in cache:
                cache[key] = images[i] ** e
            return cache[key]

        out = Poly.zero(target)
        for m, c in self.terms.items():
            t = Poly.const(target, c)
            for i, e in enumerate(m):
                if e:
                    t = t * power(i, e)
            out = out + t
        return out

    def rename(self, new_gens: Sequence[str]) -> "Poly":
        """Embed into a (super)ambient by variable names."""
        new_gens = tuple(new_gens)
        idx = [new_gens.index(g) if g in new_gens else None for g in self.gens]
        out = {}
        for m, c in self.terms.items():
            nm = [0] * len(new_gens)
            for i, e in enumerate(m):
                if e:
                    if idx[i] is None:
                        raise AmbientError(f"{self.gens[i]} missing from target ambient")
                    nm[idx[i]] = e
            out[tuple(nm)] = c
        return Poly._raw(new_gens, out)

    def drop_unused(self, keep: Sequence[str]) -> "Poly":
        """Restrict to the ambient ``keep``; fails if a dropped variable occurs."""
        return self.rename(keep)

    # normalization ----------------------------------------------------------

    def content_normalized(self, order: MonomialOrder | None = None) -> "Poly":
        """Coprime integer coefficients with positive leading coefficient."""
        if not self.terms:
            return self
        order = order or grevlex(len(self.gens))
        den = 1
        for c in self.terms.values():
            den = den * c.denominator // gcd(den, c.denominator)
        ints = {m: int(c * den) for m, c in self.terms.items()}
        g = _fold(gcd, (abs(v) for v in ints.values()))
        _, lc = self.leading_term(order)
        sign = -1 if lc < 0 else 1
        return Poly._raw(self.gens, {m: Fraction(sign * v // g) for m, v in ints.items()})

    def monic(self, order: MonomialOrder) -> "Poly":
        _, lc = self.leading_term(order)
        return self.scale(1 / lc)

    def is_scalar_multiple(self, other: "Poly") -> bool:
        self._check(other)
        if not self.terms or not other.terms:
            return not self.terms and not other.terms
        if self.terms.keys() != other.terms.keys():
            return False
        m0 = next(iter(self.terms))
        r = self.terms[m0] / other.terms[m0]
        return all(self.terms[m] == r * other.terms[m] for m in self.terms)

    # text -------------------------------------------------------------------

    def to_text(self, order: MonomialOrder | None = None) -> str:
        return format_poly(self, order)

    def __repr__(self):
        return f"Poly({self.to_text()!r})"

    def __str__(self):
        return self.to_text()


# ---------------------------------------------------------------------------
# textual format: "3*x^2*y - 1/2*z + 7"
# ---------------------------------------------------------------------------


def format_poly(p: Poly, order: MonomialOrder | None = None) -> str:
    if not p.terms:
        return "0"
    order = order or grevlex(len(p.gens))
    parts = []
    for m, c in p.sorted_terms(order):
        factors = []
        for g, e in zip(p.gens, m):
            if e == 1:
                factors.append(g)
            elif e > 1:
                factors.append(f"{g}^{e}")
        mag = abs(c)
        if not factors:
            body = str(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = f"{mag}*" + "*".join(factors)
        sign = "-" if c < 0 else "+"
        parts.append((sign, body))
    head_sign, head = parts[0]
    text = ("-" if head_sign == "-" else "") + head
    for sign, body in parts[1:]:
        text += f" {sign} {body}"
    return text


_TERM_SPLIT = re.compile(r"\s*([+-])\s*")
_FACTOR = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)(?:\^(\d+))?$")
_NUMBER = re.compile(r"^\d+(?:/\d+)?$")


def parse_poly(text: str, gens: Sequence[str]) -> Poly:
    """Parse the output of :func:`format_poly` (or any sum of products)."""
    gens = tuple(gens)
    index = {g: i for i, g in enumerate(gens)}
    s = text.strip()
    if not s:
        raise ValueError("empty polynomial text")
    if s[0] not in "+-":
        s = "+" + s
    pieces = _TERM_SPLIT.split(s)
    # split yields ['', sign, term, sign, term, ...]
    if pieces[0] != "":
        raise ValueError(f"malformed polynomial text: {text!r}")
    terms: dict = {}
    for sign, body in zip(pieces[1::2], pieces[2::2]):
        if not body:
            raise ValueError(f"dangling sign in {text!r}")
        coef = Fraction(1)
        mono = [0] * len(gens)
        for factor in body.split("*"):
            factor = factor.strip()
            if _NUMBER.match(factor):
                coef *= Fraction(factor)
                continue
            m = _FACTOR.match(factor)
            if not m:
                raise ValueError(f"bad factor {factor!r} in {text!r}")
            name, exp = m.group(1), int(m.group(2) or 1)
            if name not in index:
                raise ValueError(f"unknown variable {name!r}")
            mono[index[name]] += exp
        if sign == "-":
            coef = -coef
        key = tuple(mono)
        terms[key] = terms.get(key, 0) + coef
    return Poly(gens, terms)
