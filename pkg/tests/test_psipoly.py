import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from hyperstab.psipoly import (
    ONE,
    PSI,
    ZERO,
    PolyMatrix,
    PsiPoly,
    StateLinearForm,
    form_disturbed_derivative,
    form_nominal_derivative,
    format_poly,
    poly_arith,
    poly_eval,
    polymatrix_inverse_unitriangular,
)

small_ints = st.integers(-5, 5)
polys = st.lists(small_ints, max_size=6).map(PsiPoly)
psi_sym = sp.Symbol("psi")


def to_sympy(p: PsiPoly):
    return sum(sp.Integer(int(c)) * psi_sym**k for k, c in enumerate(p.coeffs))


def test_arith_examples():
    assert poly_arith("add", PsiPoly([1]), PsiPoly([0, 1])).coeffs == (1, 1)
    assert poly_arith("mul", PsiPoly([0, 1]), PsiPoly([0, 1, 1])).coeffs == (0, 0, 1, 1)
    p = PsiPoly([3, 0, 2])
    assert poly_arith("mul", PsiPoly([1]), p) == p
    assert poly_arith("scale", p, 2).coeffs == (6, 0, 4)
    assert poly_arith("sub", p, p) == ZERO


def test_eval_examples():
    assert poly_eval(PsiPoly([1, 0, 0, 1]), 2.0) == 9.0
    assert poly_eval(PsiPoly([0]), 3.7) == 0.0
    assert poly_eval([1, 1, 0, 1], 1.0) == 3.0


def test_canonical_trim():
    assert PsiPoly([1, 2, 0, 0]).coeffs == (1, 2)
    assert PsiPoly([0, 0]).is_zero()
    assert ZERO.degree == -1
    assert (PSI - PSI).coeffs == ()


@given(polys, polys)
def test_arith_matches_sympy(p, q):
    for got, want in ((p + q, to_sympy(p) + to_sympy(q)),
                      (p - q, to_sympy(p) - to_sympy(q)),
                      (p * q, to_sympy(p) * to_sympy(q))):
        assert sp.expand(to_sympy(got) - want) == 0


@given(polys, polys)
def test_degree_of_product(p, q):
    if p and q:
        assert (p * q).degree == p.degree + q.degree


@given(polys)
def test_derivative_matches_sympy(p):
    assert sp.expand(to_sympy(p.deriv()) - sp.diff(to_sympy(p), psi_sym)) == 0


@given(polys, st.floats(-3, 3))
def test_horner_matches_direct_sum(p, x):
    direct = sum(c * x**k for k, c in enumerate(p.coeffs))
    assert poly_eval(p, x) == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_vectorized_eval():
    p = PsiPoly([1, -2, 3])
    x = np.linspace(-2, 2, 5)
    np.testing.assert_allclose(p(x), 1 - 2 * x + 3 * x**2)


def test_pretty_printer():
    assert format_poly(PsiPoly([0, 0, 3, 1, 0, 0, 1])) == "psi^6 + psi^3 + 3*psi^2"
    assert format_poly(PsiPoly([-1, 0, 1])) == "psi^2 - 1"
    assert format_poly(ZERO) == "0"
    f = StateLinearForm([PsiPoly([1, 0, 0, 1]), PsiPoly([0, 1, 1]), ONE])
    assert str(f) == "x3 + (psi^2 + psi)*x2 + (psi^3 + 1)*x1"


def test_nominal_derivative_second_sigma():
    # sigma2 = x2 + l1*psi*x1 with psi' = 1, n = 2
    l1 = 1.7
    f = StateLinearForm([PsiPoly([0, l1]), ONE])
    drift, q = form_nominal_derivative(f, (1.0, 0.0))
    assert drift.terms[0] == PsiPoly([l1])
    assert drift.terms[1] == PsiPoly([0, l1])
    assert q == ONE


def test_nominal_derivative_first_state():
    f = StateLinearForm.basis(3, 0)
    drift, q = form_nominal_derivative(f, (1.0, 0.0))
    assert drift.terms == (ZERO, ONE, ZERO)
    assert q == ZERO


def test_nominal_derivative_exponential_closure():
    alpha = 0.7
    f = StateLinearForm([PsiPoly([0, 0, 1]), ZERO])
    drift, q = form_nominal_derivative(f, (0.0, alpha))
    assert drift.terms[0] == PsiPoly([0, 0, 2 * alpha])
    assert drift.terms[1] == PsiPoly([0, 0, 1])


def test_nominal_derivative_rejects_dimension():
    with pytest.raises(ValueError):
        form_nominal_derivative(StateLinearForm.basis(2, 0), (1.0, 0.0), n=3)
    with pytest.raises(ValueError):
        StateLinearForm.basis(2, 0) + StateLinearForm.basis(3, 0)


forms = st.lists(polys, min_size=3, max_size=3).map(StateLinearForm)


@given(forms, forms, small_ints, small_ints)
def test_nominal_derivative_is_linear(f, g, a, b):
    closure = (1.0, 0.5)
    lhs, ql = form_nominal_derivative(f * a + g * b, closure)
    df, qf = form_nominal_derivative(f, closure)
    dg, qg = form_nominal_derivative(g, closure)
    assert (lhs - (df * a + dg * b)).is_zero()
    assert ql == qf * a + qg * b


def test_disturbed_derivative_reads_coefficients():
    f = StateLinearForm([PsiPoly([1, 2]), PSI, ONE])
    drift, q, dist = form_disturbed_derivative(f, (1.0, 0.0))
    assert dist == f.terms
    assert q == ONE


@pytest.mark.parametrize("closure", [(1.0, 0.0), (0.0, 0.4)])
def test_derivative_along_nominal_trajectory(closure):
    # x' = shift(x) with x3' = 0, psi' = c0 + c1 psi, integrated exactly by polynomials in t
    f = StateLinearForm([PsiPoly([1, 0, 2]), PsiPoly([0, 3]), PsiPoly([0.5, 1])])
    drift, q = form_nominal_derivative(f, closure)
    x0 = np.array([0.3, -0.2, 0.9])
    c0, c1 = closure

    def state(t):
        return np.array([x0[0] + x0[1] * t + x0[2] * t**2 / 2, x0[1] + x0[2] * t, x0[2]])

    def psi(t):
        return 1.0 + t if c1 == 0 else np.exp(c1 * t)

    delta = 1e-5
    for t in (0.2, 1.0, 2.5):
        fd = (f.evaluate(psi(t + delta), state(t + delta))
              - f.evaluate(psi(t - delta), state(t - delta))) / (2 * delta)
        exact = drift.evaluate(psi(t), state(t))  # input slot x3' = 0 here
        assert fd == pytest.approx(exact, rel=1e-6)


def test_polymatrix_identity_and_product():
    I = PolyMatrix.identity(3)
    assert polymatrix_inverse_unitriangular(I) == I
    A = PolyMatrix([[ONE, ZERO], [PSI, ONE]])
    B = polymatrix_inverse_unitriangular(A)
    assert A @ B == PolyMatrix.identity(2)
    np.testing.assert_allclose(A.evaluate(2.0), [[1, 0], [2, 1]])
    np.testing.assert_allclose(A.evaluate(np.array([1.0, 3.0]))[1], [[1, 0], [3, 1]])


def test_inverse_rejects_non_unitriangular():
    with pytest.raises(ValueError):
        polymatrix_inverse_unitriangular(PolyMatrix([[ONE, PSI], [ZERO, ONE]]))
    with pytest.raises(ValueError):
        polymatrix_inverse_unitriangular(PolyMatrix([[PSI, ZERO], [ZERO, ONE]]))


@given(st.lists(polys, min_size=6, max_size=6))
def test_inverse_of_random_unitriangular(entries):
    it = iter(entries)
    rows = [[ONE if i == j else (next(it) if j < i else ZERO) for j in range(4)]
            for i in range(4)]
    A = PolyMatrix(rows)
    assert A @ polymatrix_inverse_unitriangular(A) == PolyMatrix.identity(4)
