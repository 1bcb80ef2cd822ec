"""Gröbner bases over the rationals: division, Buchberger, elimination.

Internally every monomial is packed into one Python int that carries both
the order weights (high bits) and the raw exponents (low bits).  Packing is
additive, so monomial products are integer sums, comparison under the order
is integer comparison, and divisibility is a guard-bit test on the low part.
Coefficients are ``gmpy2.mpq``; basis elements are kept monic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2

from .polycore import AmbientError, MonomialOrder, Poly, block_order, grevlex

__all__ = [
    "IdealBasis",
    "GroebnerStats",
    "ResourceCapExceeded",
    "Caps",
    "reduce",
    "buchberger",
    "eliminate",
    "saturate",
    "member",
    "s_polynomial",
    "is_groebner",
    "minimal_generators",
]

_EXP_BITS = 16  # per-exponent field, top bit is the guard
_MAX_EXP = (1 << (_EXP_BITS - 1)) - 1


class ResourceCapExceeded(RuntimeError):
    """Raised when a Buchberger run exceeds its configured limits."""

    def __init__(self, message: str, stats: "GroebnerStats"):
        super().__init__(f"{message} ({stats.summary()})")
        self.stats = stats


@dataclass
class Caps:
    max_pairs: int = 500_000
    max_coefficient_bits: int = 200_000


@dataclass
class GroebnerStats:
    pairs_processed: int = 0
    pairs_skipped: int = 0
    zero_reductions: int = 0
    max_degree: int = 0
    max_coefficient_bits: int = 0
    basis_size: int = 0

    def summary(self) -> str:
        return (
            f"pairs={self.pairs_processed} skipped={self.pairs_skipped} "
            f"zero={self.zero_reductions} max_deg={self.max_degree} "
            f"max_coeff_bits={self.max_coefficient_bits} basis={self.basis_size}"
        )

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class IdealBasis:
    generators: list
    order: MonomialOrder
    reduced_flag: bool = False
    stats: GroebnerStats = field(default_factory=GroebnerStats)
    source: "IdealBasis | None" = None  # basis this one was read off, if any
    elapsed: float = 0.0

    @property
    def gens(self) -> tuple:
        return self.generators[0].gens if self.generators else ()

    def __len__(self):
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    def leading_monomials(self) -> list[tuple]:
        return [g.leading_term(self.order)[0] for g in self.generators]

    def to_text(self) -> str:
        return "\n".join(g.to_text(self.order) for g in self.generators)

    def standard_monomials(self, limit: int = 100_000) -> list[tuple]:
        """Monomials outside the initial ideal; finite iff zero-dimensional."""
        lms = self.leading_monomials()
        n = self.order.nvars
        if any(sum(m) == 0 for m in lms):
            return []
        # zero-dimensional needs a pure power of every variable
        for i in range(n):
            if not any(m[i] > 0 and sum(m) == m[i] for m in lms):
                raise ValueError("ideal is not zero-dimensional")
        out = []
        stack = [(0,) * n]
        seen = {stack[0]}
        while stack:
            m = stack.pop()
            if any(all(a <= b for a, b in zip(l, m)) for l in lms):
                continue
            out.append(m)
            if len(out) > limit:
                raise ValueError("too many standard monomials")
            for i in range(n):
                nm = m[:i] + (m[i] + 1,) + m[i + 1 :]
                if nm not in seen:
                    seen.add(nm)
                    stack.append(nm)
        return sorted(out, key=self.order.key)


# ---------------------------------------------------------------------------
# packed representation
# ---------------------------------------------------------------------------


class _Packer:
    def __init__(self, order: MonomialOrder):
        n = order.nvars
        rows = order.weight_rows()
        wbits = _EXP_BITS + max(1, n).bit_length() + 1
        low = n * _EXP_BITS
        self.n = n
        self.order = order
        self.low_mask = (1 << low) - 1
        self.guard = sum(1 << (i * _EXP_BITS + _EXP_BITS - 1) for i in range(n))
        self.field_mask = (1 << _EXP_BITS) - 1
        cols = []
        for i in range(n):
            v = 1 << (i * _EXP_BITS)
            for r, row in enumerate(rows):
                if row[i]:
                    v += row[i] << (low + (n - 1 - r) * wbits)
            cols.append(v)
        self.cols = cols

    def pack(self, m: Sequence[int]) -> int:
        k = 0
        for e, c in zip(m, self.cols):
            if e:
                if e > _MAX_EXP:
                    raise OverflowError("exponent too large for packed monomial")
                k += e * c
        return k

    def unpack(self, k: int) -> tuple:
        fm, b = self.field_mask, _EXP_BITS
        return tuple((k >> (i * b)) & fm for i in range(self.n))

    def degree(self, k: int) -> int:
        return sum(self.unpack(k))

    def divides(self, a: int, b: int) -> bool:
        lm = self.low_mask
        return ((b & lm) - (a & lm)) & self.guard == 0

    def lcm(self, a: int, b: int) -> int:
        ea, eb = self.unpack(a), self.unpack(b)
        return self.pack([x if x > y else y for x, y in zip(ea, eb)])

    def coprime(self, a: int, b: int) -> bool:
        ea, eb = self.unpack(a), self.unpack(b)
        return not any(x and y for x, y in zip(ea, eb))

    def to_internal(self, p: Poly) -> dict:
        return {self.pack(m): gmpy2.mpq(c.numerator, c.denominator) for m, c in p.terms.items()}

    def to_poly(self, gens: tuple, d: dict) -> Poly:
        return Poly._raw(
            gens, {self.unpack(k): Fraction(int(c.numerator), int(c.denominator)) for k, c in d.items()}
        )


def _monic(p: dict) -> dict:
    lc = p[max(p)]
    if lc == 1:
        return p
    inv = 1 / lc
    return {k: c * inv for k, c in p.items()}


def _coeff_bits(p: dict) -> int:
    return max(max(gmpy2.mpz(c.numerator).bit_length(), gmpy2.mpz(c.denominator).bit_length()) for c in p.values())


def _normal_form(p: dict, basis: list, pk: _Packer, full: bool = True) -> dict:
    """Remainder of ``p`` modulo monic ``basis`` = [(lead_key, poly), ...]."""
    p = dict(p)
    r = {}
    guard, lm = pk.guard, pk.low_mask
    while p:
        k = max(p)
        c = p[k]
        klow = k & lm
        for lk, g in basis:
            if ((klow - (lk & lm)) & guard) == 0:
                d = k - lk
                del p[k]
                for gk, gc in g.items():
                    if gk == lk:
                        continue
                    nk = gk + d
                    v = p.get(nk)
                    if v is None:
                        p[nk] = -c * gc
                    else:
                        v -= c * gc
                        if v:
                            p[nk] = v
                        else:
                            del p[nk]
                break
        else:
            r[k] = c
            del p[k]
            if not full:
                r.update(p)
                break
    return r


def _spoly(f: dict, lf: int, g: dict, lg: int, pk: _Packer) -> dict:
    l = pk.lcm(lf, lg)
    df, dg = l - lf, l - lg
    out = {k + df: c for k, c in f.items() if k != lf}
    for k, c in g.items():
        if k == lg:
            continue
        nk = k + dg
        v = out.get(nk)
        if v is None:
            out[nk] = -c
        else:
            v -= c
            if v:
                out[nk] = v
            else:
                del out[nk]
    return out


# ---------------------------------------------------------------------------
# Buchberger with Gebauer-Möller pair management
# ---------------------------------------------------------------------------


def _buchberger_internal(polys: list, pk: _Packer, caps: Caps, stats: GroebnerStats) -> list:
    G: list = []  # all polys ever added: (lead, poly)
    active: list = []  # indices of the current (not yet superseded) basis
    heap: list = []  # (lcm degree, lcm key, i, j)
    live_pairs: set = set()
    lcm_of: dict = {}

    def update(h_idx: int):
        lh = G[h_idx][0]
        # new candidate pairs with every active element
        cand = []
        for i in active:
            li = G[i][0]
            cand.append((i, pk.lcm(li, lh), pk.coprime(li, lh)))
        keep = []
        for pos, (i, l, cop) in enumerate(cand):
            if cop:
                keep.append((i, l, cop))
                continue
            dominated = False
            for j, l2, _ in cand[pos + 1 :]:
                if pk.divides(l2, l):
                    dominated = True
                    break
            if not dominated:
                for j, l2, _ in keep:
                    if pk.divides(l2, l):
                        dominated = True
                        break
            if not dominated:
                keep.append((i, l, cop))
            else:
                stats.pairs_skipped += 1
        # chain criterion on old pairs
        dead = []
        for pair in live_pairs:
            i, j = pair
            l = lcm_of[pair]
            if pk.divides(lh, l):
                if pk.lcm(G[i][0], lh) != l and pk.lcm(G[j][0], lh) != l:
                    dead.append(pair)
        for pair in dead:
            live_pairs.discard(pair)
            stats.pairs_skipped += 1
        for i, l, cop in keep:
            if cop:
                stats.pairs_skipped += 1
                continue
            pair = (i, h_idx)
            live_pairs.add(pair)
            lcm_of[pair] = l
            heapq.heappush(heap, (pk.degree(l), l, i, h_idx))
        still = [i for i in active if not pk.divides(lh, G[i][0])]
        still.append(h_idx)
        active[:] = still

    def add(h: dict):
        h = _monic(h)
        bits = _coeff_bits(h)
        stats.max_coefficient_bits = max(stats.max_coefficient_bits, bits)
        if bits > caps.max_coefficient_bits:
            raise ResourceCapExceeded("coefficient bit-length cap exceeded", stats)
        lh = max(h)
        stats.max_degree = max(stats.max_degree, max(pk.degree(k) for k in h))
        G.append((lh, h))
        update(len(G) - 1)

    def reducers():
        return [G[i] for i in active]

    # inputs, lowest leading monomial first so early ones reduce later ones
    for p in sorted((q for q in polys if q), key=max):
        h = _normal_form(p, reducers(), pk)
        if h:
            add(h)

    while heap:
        deg, l, i, j = heapq.heappop(heap)
        pair = (i, j)
        if pair not in live_pairs:
            continue
        live_pairs.discard(pair)
        stats.pairs_processed += 1
        if stats.pairs_processed > caps.max_pairs:
            raise ResourceCapExceeded("pair cap exceeded", stats)
        s = _spoly(G[i][1], G[i][0], G[j][1], G[j][0], pk)
        h = _normal_form(s, reducers(), pk)
        if h:
            add(h)
        else:
            stats.zero_reductions += 1

    return [G[i] for i in active]


def _reduce_basis(basis: list, pk: _Packer) -> list:
    """Minimal + tail-reduced, sorted by leading monomial ascending."""
    basis = sorted(basis, key=lambda t: t[0])
    minimal = []
    for lk, g in basis:
        if not any(pk.divides(lo, lk) for lo, _ in minimal):
            minimal.append((lk, g))
    out = []
    for idx, (lk, g) in enumerate(minimal):
        others = minimal[:idx] + minimal[idx + 1 :]
        tail = {k: c for k, c in g.items() if k != lk}
        tail = _normal_form(tail, others, pk)
        tail[lk] = g[lk]
        out.append((lk, _monic(tail)))
    return out


def _as_list(gens) -> list:
    if isinstance(gens, IdealBasis):
        return list(gens.generators)
    if isinstance(gens, Poly):
        return [gens]
    return list(gens)


def _common_gens(polys: list) -> tuple:
    if not polys:
        raise ValueError("need at least one polynomial")
    gens = polys[0].gens
    for p in polys[1:]:
        if p.gens != gens:
            raise AmbientError("all polynomials must share the ambient")
    return gens


def buchberger(gens, order: MonomialOrder | None = None, caps: Caps | None = None) -> IdealBasis:
    """Reduced Gröbner basis; generators are content-normalized.

    Output is sorted by leading monomial (ascending under ``order``) so it
    is deterministic for a given input ideal and order.
    """
    polys = _as_list(gens)
    ambient = _common_gens(polys)
    order = order or grevlex(len(ambient))
    if order.nvars != len(ambient):
        raise AmbientError("order and ambient disagree on the number of variables")
    caps = caps or Caps()
    pk = _Packer(order)
    stats = GroebnerStats()
    internal = [pk.to_internal(p) for p in polys if p]
    if not internal:
        return IdealBasis([], order, True, stats)
    basis = _buchberger_internal(internal, pk, caps, stats)
    basis = _reduce_basis(basis, pk)
    stats.basis_size = len(basis)
    out = [pk.to_poly(ambient, g).content_normalized(order) for _, g in basis]
    return IdealBasis(out, order, True, stats)


def reduce(p: Poly, basis, order: MonomialOrder | None = None) -> Poly:
    """Normal form of ``p`` modulo ``basis`` (an IdealBasis or list of Poly).

    The result is canonical when ``basis`` is a Gröbner basis; otherwise it
    is a remainder of multivariate division with the divisors tried in the
    given sequence.
    """
    if isinstance(basis, IdealBasis):
        order = order or basis.order
        polys = basis.generators
    else:
        polys = _as_list(basis)
    if order is None:
        order = grevlex(len(p.gens))
    if polys and polys[0].gens != p.gens:
        raise AmbientError("polynomial and basis must share the ambient")
    pk = _Packer(order)
    divs = []
    for g in polys:
        if g:
            d = _monic(pk.to_internal(g))
            divs.append((max(d), d))
    r = _normal_form(pk.to_internal(p), divs, pk)
    return pk.to_poly(p.gens, r)


def s_polynomial(f: Poly, g: Poly, order: MonomialOrder) -> Poly:
    pk = _Packer(order)
    fi, gi = _monic(pk.to_internal(f)), _monic(pk.to_internal(g))
    return pk.to_poly(f.gens, _spoly(fi, max(fi), gi, max(gi), pk))


def is_groebner(basis: IdealBasis) -> bool:
    """Exhaustive Buchberger criterion: every S-polynomial reduces to zero."""
    gs = [g for g in basis.generators if g]
    pk = _Packer(basis.order)
    internal = [_monic(pk.to_internal(g)) for g in gs]
    divs = [(max(d), d) for d in internal]
    for a in range(len(divs)):
        for b in range(a + 1, len(divs)):
            s = _spoly(divs[a][1], divs[a][0], divs[b][1], divs[b][0], pk)
            if _normal_form(s, divs, pk):
                return False
    return True


def eliminate(gens, drop: Iterable[str], caps: Caps | None = None) -> IdealBasis:
    """Gröbner basis of the elimination ideal, over the remaining variables.

    Uses a block order (grevlex on ``drop`` > grevlex on the rest).  The
    returned basis lives in the ambient of the kept variables, ordered by
    the restriction of the block order, i.e. grevlex on the kept variables.
    """
    polys = _as_list(gens)
    ambient = _common_gens(polys)
    drop = list(drop)
    for v in drop:
        if v not in ambient:
            raise AmbientError(f"{v} is not in the ambient")
    idx = [ambient.index(v) for v in drop]
    keep = tuple(g for g in ambient if g not in drop)
    order = block_order(len(ambient), idx)
    full = buchberger(polys, order, caps)
    kept = [g.rename(keep) for g in full.generators if not (g.support() & set(drop))]
    keep_order = grevlex(len(keep))
    kept.sort(key=lambda g: keep_order.key(g.leading_term(keep_order)[0]))
    stats = full.stats
    stats.basis_size = len(kept)
    return IdealBasis(kept, keep_order, True, stats)


def _fresh_name(ambient: Sequence[str], stem: str = "t") -> str:
    name = stem
    k = 0
    while name in ambient:
        k += 1
        name = f"{stem}{k}"
    return name


def saturate(gens, f: Poly, caps: Caps | None = None) -> IdealBasis:
    """I : f^∞ via the Rabinowitsch trick (adjoin t·f - 1, eliminate t)."""
    polys = _as_list(gens)
    ambient = _common_gens(polys)
    if f.gens != ambient:
        raise AmbientError("saturating polynomial must share the ambient")
    if not f:
        raise ValueError("cannot saturate by zero")
    t = _fresh_name(ambient)
    big = (t,) + ambient
    lifted = [p.rename(big) for p in polys]
    tv = Poly.var(big, t)
    lifted.append(tv * f.rename(big) - 1)
    return eliminate(lifted, [t], caps)


def member(p: Poly, gens, caps: Caps | None = None) -> bool:
    if isinstance(gens, IdealBasis) and gens.reduced_flag:
        basis = gens
    else:
        basis = buchberger(_as_list(gens), None, caps)
    return reduce(p, basis).is_zero()


def minimal_generators(basis: IdealBasis, caps: Caps | None = None) -> list:
    """Minimal generating set of a homogeneous ideal, picked from ``basis``.

    Generators are processed by increasing degree (then leading monomial);
    one is kept when it is not in the ideal spanned by those already kept.
    For a homogeneous ideal the number kept per degree is an invariant.
    """
    order = basis.order
    gs = sorted(basis.generators, key=lambda g: (g.degree(), order.key(g.leading_term(order)[0])))
    for g in gs:
        if not g.is_homogeneous():
            raise ValueError("minimal generators are only defined here for homogeneous ideals")
    kept: list = []
    current = None
    for g in gs:
        if current is not None and reduce(g, current).is_zero():
            continue
        kept.append(g)
        current = buchberger(kept, order, caps)
    return kept
