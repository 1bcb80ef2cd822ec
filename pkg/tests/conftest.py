import random
from fractions import Fraction

import pytest

from elimpose.polycore import Poly, monomials_up_to_degree

try:
    import sympy as sp
except ImportError:  # pragma: no cover
    sp = None


def random_poly(rng: random.Random, gens, degree: int, n_terms: int, coef: int = 5) -> Poly:
    monos = monomials_up_to_degree(len(gens), degree)
    terms = {}
    for m in rng.sample(monos, min(n_terms, len(monos))):
        terms[m] = rng.randint(-coef, coef) or 1
    return Poly(gens, terms)


def to_sympy(p: Poly, symbols):
    expr = 0
    for m, c in p.terms.items():
        t = sp.Rational(c.numerator, c.denominator)
        for s, e in zip(symbols, m):
            t *= s**e
        expr += t
    return expr


def sympy_monic_set(exprs, symbols) -> set:
    out = set()
    for e in exprs:
        q = sp.Poly(e, *symbols)
        if not q.is_zero:
            out.add(q.monic().as_expr())
    return out


def random_rotation_exact(rng: random.Random):
    """Rational rotation from a rational quaternion (Cayley-style)."""
    while True:
        a, b, c, d = (Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(4))
        n = a * a + b * b + c * c + d * d
        if n:
            break
    R = [
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
    ]
    return [[x / n for x in row] for row in R]


def matmul_exact(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))] for i in range(len(A))]


def skew_exact(t):
    x, y, z = t
    zero = Fraction(0)
    return [[zero, -z, y], [z, zero, -x], [-y, x, zero]]


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running test")
