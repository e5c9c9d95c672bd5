import math

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from polyalg import (
    MultiPoly,
    UniPoly,
    isolate_real_roots,
    primitive,
    resultant,
    solve_quartic_exact,
    substitute,
)

AB = ("A", "B")

monomials = st.tuples(st.integers(0, 3), st.integers(0, 3))
small_polys = st.dictionaries(monomials, st.integers(-5, 5), max_size=5).map(lambda t: MultiPoly(AB, t))


@settings(max_examples=40, deadline=None)
@given(small_polys, small_polys, small_polys)
def test_ring_axioms(p, q, r):
    assert p + q == q + p
    assert p * q == q * p
    assert (p + q) + r == p + (q + r)
    assert p * (q + r) == p * q + p * r
    assert p - p == MultiPoly.zero(AB)
    assert p * 1 == p


def test_zero_terms_are_dropped():
    p = MultiPoly(AB, {(1, 0): 0, (0, 1): 2})
    assert p.terms == {(0, 1): 2}
    assert MultiPoly.zero(AB).is_zero()
    assert MultiPoly.zero(AB).degree("A") == -1


def test_equality_ignores_unused_variables():
    a = MultiPoly.var("A", AB)
    assert a == MultiPoly.var("A")
    assert hash(a) == hash(MultiPoly.var("A"))
    assert a.drop_unused().variables == ("A",)


def test_rational_coefficients_rejected():
    with pytest.raises(ValueError):
        MultiPoly.from_expr("A/2 + B", AB)
    with pytest.raises(ValueError):
        MultiPoly(AB, {(1, 0): 1.5})


def test_binomial_expansion():
    a, b = MultiPoly.var("A", AB), MultiPoly.var("B", AB)
    assert (a + b) ** 2 == MultiPoly.from_expr("A**2 + 2*A*B + B**2", AB)
    assert (a - b) * (a + b) == MultiPoly.from_expr("A**2 - B**2", AB)
    assert ((a + b) ** 3).total_degree() == 3


def test_coefficient_and_evaluate():
    p = MultiPoly.from_expr("3*A**2*B + A*B - 7", AB)
    assert p.coefficient("A", 2) == MultiPoly.from_expr("3*B", AB)
    assert p.coefficient("A", 0) == -7
    assert p.evaluate({"A": 2.0, "B": -1.0}) == pytest.approx(-21.0)
    assert p.content() == 1
    with pytest.raises(ValueError):
        p.evaluate({"A": 1.0})


def test_substitute():
    p = MultiPoly.from_expr("A**2 + B", AB)
    got = substitute(p, "B", MultiPoly.from_expr("A - 1", ("A",)))
    assert got == MultiPoly.from_expr("A**2 + A - 1", ("A",))


def test_resultant_eliminates_variable():
    # Res_A(A² + B² - 4, (B² - 2)A² + 2BA + 3) = B⁸ - 12B⁶ + 50B⁴ - 76B² + 25
    p = MultiPoly.from_expr("A**2 + B**2 - 4", AB)
    q = MultiPoly.from_expr("(B**2 - 2)*A**2 + 2*B*A + 3", AB)
    res = resultant(p, q, "A")
    assert "A" not in res.variables
    _, prim = primitive(res)
    assert prim == MultiPoly.from_expr("B**8 - 12*B**6 + 50*B**4 - 76*B**2 + 25", ("B",))


def test_resultant_requires_positive_degree():
    with pytest.raises(ValueError):
        resultant(MultiPoly.from_expr("B + 1", AB), MultiPoly.from_expr("A*B", AB), "A")


def test_primitive_sign_and_content():
    content, prim = primitive(MultiPoly.from_expr("-6*A**2 + 4*B", AB))
    assert content == -2
    assert prim == MultiPoly.from_expr("3*A**2 - 2*B", AB)


def test_isolate_real_roots_brackets():
    roots = isolate_real_roots(UniPoly((1, 0, -2)), sympy.Rational(1, 10**10))
    assert [r.multiplicity for r in roots] == [1, 1]
    for root, exact in zip(roots, (-sympy.sqrt(2), sympy.sqrt(2))):
        lo, hi = root.bracket
        assert lo <= exact <= hi
        assert hi - lo < sympy.Rational(1, 10**10)
        assert root.refined == pytest.approx(float(exact), abs=1e-10)


def test_isolate_real_roots_multiplicity():
    # (x - 1)²(x + 2) = x³ - 3x + 2
    roots = isolate_real_roots(UniPoly((1, 0, -3, 2)))
    assert [round(r.refined, 9) for r in roots] == [-2.0, 1.0]
    assert [r.multiplicity for r in roots] == [1, 2]


def test_isolate_rejects_zero_polynomial():
    with pytest.raises(ValueError):
        isolate_real_roots(UniPoly((0,)))
    assert isolate_real_roots(UniPoly((5,))) == []


def test_solve_quartic_exact():
    roots = solve_quartic_exact(UniPoly((1, 0, 0, 0, -1)))
    real = sorted(r.refined for r in roots if r.is_real)
    assert real == pytest.approx([-1.0, 1.0])
    complex_roots = [r for r in roots if not r.is_real]
    assert len(complex_roots) == 2
    assert sorted(r.imag for r in complex_roots) == pytest.approx([-1.0, 1.0])


def test_solve_quartic_exact_irreducible_case():
    # 3x⁴ - 6x² + 2x + 1 有四个实根，其中 x = 1
    roots = solve_quartic_exact(UniPoly((3, 0, -6, 2, 1)))
    real = [r.refined for r in roots if r.is_real]
    assert len(real) == 4
    assert min(abs(x - 1.0) for x in real) < 1e-12


def test_solve_quartic_exact_degree_limit():
    with pytest.raises(ValueError):
        solve_quartic_exact(UniPoly((1, 0, 0, 0, 0, -1)))


def test_solve_quartic_exact_keeps_close_distinct_roots():
    # (10⁷x - 10⁷)(10⁷x - 10⁷ - 1)(x² + 1)：两个实根只差 1e-7
    a = 10**7
    roots = solve_quartic_exact(UniPoly((a * a, -a * (2 * a + 1), a * (a + 1) + a * a, -a * (2 * a + 1), a * (a + 1))))
    real = sorted(r.refined for r in roots if r.is_real)
    assert real == pytest.approx([1.0, 1.0 + 1e-7], abs=1e-12)
    assert [r.multiplicity for r in roots] == [1, 1, 1, 1]
    assert sorted(r.imag for r in roots if not r.is_real) == pytest.approx([-1.0, 1.0])


def test_solve_quartic_exact_repeated_roots():
    # (x² - 2)²
    roots = solve_quartic_exact(UniPoly((1, 0, -4, 0, 4)))
    assert [round(r.refined, 12) for r in roots] == [round(-math.sqrt(2), 12), round(math.sqrt(2), 12)]
    assert [r.multiplicity for r in roots] == [2, 2]


def test_unipoly_helpers():
    p = UniPoly((0, 0, 1, 2))
    assert p.degree == 1
    assert p(3.0) == pytest.approx(5.0)
    assert UniPoly((1, 2, 3)).mirrored().coefficients == (1, -2, 3)
    assert UniPoly((2, 0, -4)).is_proportional_to(UniPoly((1, 0, -2)))
    assert not UniPoly((1, 0, -2)).is_proportional_to(UniPoly((1, 0, 2)))
    assert UniPoly((-1, sympy.Rational(1, 2))).primitive().coefficients == (2, -1)


def test_unipoly_from_multipoly():
    p = MultiPoly.from_expr("B**2 - 3", AB)
    uni = UniPoly.from_multipoly(p, "B")
    assert uni.coefficients == (1, 0, -3)
    assert uni.name == "B"
    with pytest.raises(ValueError):
        UniPoly.from_multipoly(MultiPoly.from_expr("A*B", AB))
    assert math.isclose(float(uni(math.sqrt(3))), 0.0, abs_tol=1e-12)


def test_resultant_of_linear_factors():
    x = ("x",)
    res = resultant(MultiPoly.from_expr("x - 1", x), MultiPoly.from_expr("x + 1", x), "x")
    # Sylvester 行列式 det [[1, -1], [1, 1]]
    assert res == 2
    assert res.variables == ()


def test_resultant_vanishes_on_common_factor():
    p = MultiPoly.from_expr("(A - B)*(A + 1)", AB)
    q = MultiPoly.from_expr("(A - B)*(A - 2)", AB)
    assert resultant(p, q, "A").is_zero()
    q = MultiPoly.from_expr("(A - B - 1)*(A - 2)", AB)
    assert not resultant(p, q, "A").is_zero()


quartics = st.tuples(
    st.integers(1, 4), st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6)
)


@settings(max_examples=1000, deadline=None)
@given(quartics)
def test_quartic_solver_agrees_with_isolation(coeffs):
    p = UniPoly(coeffs)
    isolated = [r.refined for r in isolate_real_roots(p)]
    exact = [r.refined for r in solve_quartic_exact(p) if r.is_real]
    assert exact == pytest.approx(isolated, abs=1e-9)
    assert sum(r.multiplicity for r in solve_quartic_exact(p)) == 4
