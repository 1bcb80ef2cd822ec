import random

import pytest
import sympy as sp

from elimpose.elimderive import build_constraints, load_generators, reference_polys
from elimpose.groebner import (
    Caps,
    IdealBasis,
    ResourceCapExceeded,
    buchberger,
    eliminate,
    is_groebner,
    member,
    minimal_generators,
    reduce,
    saturate,
    s_polynomial,
)
from elimpose.polycore import Poly, grevlex, lex

from conftest import random_poly, sympy_monic_set, to_sympy

GENS = ("x", "y", "z")
X, Y, Z = (Poly.var(GENS, g) for g in GENS)
SYMS = sp.symbols(GENS)


def random_ideal(rng, nvars=None):
    n = nvars or rng.randint(2, 3)
    gens = GENS[:n]
    k = rng.randint(2, 3)
    return gens, [random_poly(rng, gens, rng.randint(1, 3), rng.randint(2, 4)) for _ in range(k)]


# --- reduce ----------------------------------------------------------------------


def test_self_reduction():
    g = X**2 * Y - Z + 3
    assert reduce(g, buchberger([g], grevlex(3))).is_zero()


def test_reduce_by_linear_substitution():
    G2 = ("x", "y")
    x, y = Poly.var(G2, "x"), Poly.var(G2, "y")
    basis = buchberger([x - y], lex(2))
    assert reduce(x**2 * y, basis) == y**3


def test_reduce_normal_form_properties():
    rng = random.Random(11)
    gens, polys = random_ideal(rng, 3)
    basis = buchberger(polys, grevlex(3))
    lms = basis.leading_monomials()
    for _ in range(20):
        p = random_poly(rng, gens, 4, 10)
        r = reduce(p, basis)
        for m in r.terms:
            assert not any(all(a <= b for a, b in zip(l, m)) for l in lms)
        assert reduce(p - r, basis).is_zero()


def test_membership_by_construction():
    rng = random.Random(5)
    gens, polys = random_ideal(rng, 3)
    basis = buchberger(polys, grevlex(3))
    for _ in range(50):
        combo = Poly.zero(gens)
        for g in polys:
            combo = combo + random_poly(rng, gens, 2, 3) * g
        assert reduce(combo, basis).is_zero()


# --- buchberger --------------------------------------------------------------------


def test_single_monomial():
    b = buchberger([X], grevlex(3))
    assert b.generators == [X]


def test_circle_and_diagonal():
    G2 = ("x", "y")
    x, y = Poly.var(G2, "x"), Poly.var(G2, "y")
    b = buchberger([x**2 + y**2 - 1, x - y], lex(2))
    assert any(g.is_scalar_multiple(2 * y**2 - 1) for g in b.generators)


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("kind", ["lex", "grevlex"])
def test_matches_sympy_reduced_basis(seed, kind):
    rng = random.Random(seed)
    gens, polys = random_ideal(rng)
    n = len(gens)
    order = lex(n) if kind == "lex" else grevlex(n)
    ours = buchberger(polys, order)
    ref = sp.groebner([to_sympy(p, SYMS[:n]) for p in polys], *SYMS[:n], order=kind)
    assert sympy_monic_set([to_sympy(g, SYMS[:n]) for g in ours.generators], SYMS[:n]) == sympy_monic_set(
        ref.exprs, SYMS[:n]
    )
    assert is_groebner(ours)


def test_idempotent_and_deterministic():
    rng = random.Random(21)
    gens, polys = random_ideal(rng, 3)
    a = buchberger(polys, grevlex(3))
    b = buchberger(a.generators, grevlex(3))
    c = buchberger(list(polys), grevlex(3))
    assert a.to_text() == b.to_text() == c.to_text()


def test_reduced_basis_invariants():
    rng = random.Random(2)
    _, polys = random_ideal(rng, 3)
    b = buchberger(polys, grevlex(3))
    order = b.order
    for i, g in enumerate(b.generators):
        lm, lc = g.leading_term(order)
        assert lc > 0 and g == g.content_normalized(order)
        for j, h in enumerate(b.generators):
            if i != j:
                assert not any(all(a <= c for a, c in zip(lm, m)) for m in h.terms)


def test_s_polynomial_cancels_leading_terms():
    order = grevlex(3)
    f, g = X**2 * Y - Z, X * Y**2 - X
    s = s_polynomial(f, g, order)
    lcm = (2, 2, 0)
    assert lcm not in s.terms


def test_cap_exceeded_carries_stats():
    polys = build_constraints("EF")
    with pytest.raises(ResourceCapExceeded) as info:
        buchberger(polys, grevlex(len(polys[0].gens)), Caps(max_pairs=3))
    assert info.value.stats.pairs_processed >= 3


# --- elimination and saturation -------------------------------------------------------


def test_linear_elimination():
    b = eliminate([X - Y, X - Z], ["x"])
    assert len(b.generators) == 1
    (g,) = b.generators
    assert g.gens == ("y", "z")
    assert g.is_scalar_multiple(Poly.var(("y", "z"), "y") - Poly.var(("y", "z"), "z"))


def test_hf_quartic_by_elimination():
    polys = build_constraints("HF")
    b = eliminate(polys, ["w"])
    ref = reference_polys("HF")["quartic"]
    assert any(g.rename(ref.gens).is_scalar_multiple(ref) for g in b.generators if g.degree() == 4)


def test_saturation_removes_component():
    G2 = ("x", "y")
    x, y = Poly.var(G2, "x"), Poly.var(G2, "y")
    sat = saturate([x * y], x)
    assert len(sat.generators) == 1 and sat.generators[0].is_scalar_multiple(y)
    sat2 = saturate([x], y)
    assert len(sat2.generators) == 1 and sat2.generators[0].is_scalar_multiple(x)
    with pytest.raises(ValueError):
        saturate([x], Poly.zero(G2))


def test_member_examples():
    G2 = ("x", "y")
    x, y = Poly.var(G2, "x"), Poly.var(G2, "y")
    assert member(x**2, [x**2, y**2])
    assert not member(x * y, [x**2, y**2])


def test_minimal_generators_drop_redundant():
    b = buchberger([X**2, X * Y, X**2 * Y + X * Y], grevlex(3))
    mins = minimal_generators(b)
    assert len(mins) == 2


def test_fef_saturation_matters():
    """Without saturation the f-form elimination ideal misses the quintic."""
    from elimpose.elimderive import derive_fef_focal

    quintic = reference_polys("FEF")["quintic"]
    sat = derive_fef_focal(saturate_first=True)
    plain = derive_fef_focal(saturate_first=False)
    assert member(quintic, sat)
    assert not member(quintic, plain)
    for g in plain.generators:
        assert member(g, sat)


# --- elimination theorem ----------------------------------------------------------------


@pytest.mark.parametrize("seed", range(8))
def test_elimination_theorem_subsets(seed):
    rng = random.Random(100 + seed)
    gens, polys = random_ideal(rng, 3)
    G = buchberger(polys, lex(3))
    for l in (1, 2):
        keep = gens[l:]
        subset = [g.rename(keep) for g in G.generators if not (g.support() & set(gens[:l]))]
        order = lex(len(keep))
        if subset:
            assert is_groebner(IdealBasis(subset, order))
        elim = eliminate(polys, gens[:l])
        for g in elim.generators:
            assert reduce(g.rename(keep), buchberger(subset, order)).is_zero() if subset else g.is_zero()
        for g in subset:
            assert member(g, elim)


def test_ef_generators_basis_passes_s_pair_check():
    gens = load_generators("EF")
    b = buchberger(gens, grevlex(9))
    assert is_groebner(b)
