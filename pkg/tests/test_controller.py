import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from hyperstab.controller import (
    ControllerSpec,
    cancellation_residual,
    eval_control,
    synthesize,
    validate_gains,
)
from hyperstab.errors import GainConditionError
from hyperstab.gain import GainSchedule

psi = sp.Symbol("psi")


def xs(n):
    return sp.symbols(f"x1:{n + 1}")


def sym_form(form, n):
    """Sympy expression of a StateLinearForm in psi and x1..xn."""
    x = xs(n)
    out = 0
    for j, p in enumerate(form.terms):
        out += sum(sp.nsimplify(c) * psi**k for k, c in enumerate(p.coeffs)) * x[j]
    return sp.expand(out)


def oracle(n, lam, m, closure=(1, 0)):
    """Independent sympy recursion: sigma list and control expression."""
    x = xs(n)
    u = sp.Symbol("u")
    lam = [sp.nsimplify(v) for v in lam]
    dpsi = closure[0] + closure[1] * psi

    def ddt(e):
        out = sp.diff(e, psi) * dpsi
        for i in range(n):
            out += sp.diff(e, x[i]) * (x[i + 1] if i + 1 < n else u)
        return sp.expand(out)

    sig = [x[0]]
    for i in range(1, n):
        sig.append(sp.expand(ddt(sig[-1]) + lam[i - 1] * psi**i * sig[-1]))
    dn = ddt(sig[-1])
    assert sp.expand(dn.coeff(u)) == 1
    drift = sp.expand(dn - u)
    control = sp.expand(-drift - lam[-1] * psi**m * sig[-1])
    return sig, control


def same(a, b):
    return sp.expand(a - b) == 0


@pytest.mark.parametrize("n,lam,m", [
    (1, (1,), 1), (2, (1, 2), 2), (3, (1, 1, 1), 3), (3, (1, 2, 4), 4),
    (4, (1, 1, 1, 1), 4), (5, (1, 2, 3, 4, 5), 6),
])
def test_matches_sympy_oracle(n, lam, m):
    c = synthesize(ControllerSpec(n, lam, m), force=True)
    sig, control = oracle(n, lam, m)
    for f, s in zip(c.sigma_forms, sig):
        assert same(sym_form(f, n), s)
    assert same(sym_form(c.control_form, n), control)


def test_matches_oracle_exponential_gain():
    spec = ControllerSpec(3, (1, 2, 4), 3, GainSchedule("exp", a=2.0, alpha=0.5))
    c = synthesize(spec)
    sig, control = oracle(3, (1, 2, 4), 3, closure=(0, sp.Rational(1, 2)))
    assert same(sym_form(c.sigma_forms[2], 3), sig[2])
    assert same(sym_form(c.control_form, 3), control)


def test_second_order_control():
    l1, l2 = 1, 2
    c = synthesize(ControllerSpec(2, (l1, l2)))
    x1, x2 = xs(2)
    sigma2 = x2 + l1 * psi * x1
    want = -(l1 * x1 + l1 * psi * x2) - l2 * psi**2 * sigma2
    assert same(sym_form(c.control_form, 2), want)


def test_eval_control_examples():
    c = synthesize(ControllerSpec(2, (1, 2)))
    # psi(0) = 1 and x = (1, 0): u = -1 - 2 * 1
    assert eval_control(c, 0.0, [1.0, 0.0]) == pytest.approx(-3.0)
    capped = synthesize(ControllerSpec(2, (1, 2), schedule=GainSchedule(cap=1.0)))
    assert eval_control(capped, 100.0, [1.0, 0.0]) == pytest.approx(-3.0)


def test_eval_control_vectorized():
    c = synthesize(ControllerSpec(3, (1, 2, 4)))
    t = np.linspace(0, 3, 7)
    x = np.random.default_rng(0).normal(size=(7, 3))
    batch = eval_control(c, t, x)
    assert batch.shape == (7,)
    for k in range(7):
        assert batch[k] == pytest.approx(eval_control(c, t[k], x[k]), rel=1e-14)
    with pytest.raises(ValueError):
        eval_control(c, 0.0, [1.0, 2.0])


def test_validate_gains_examples():
    assert validate_gains(ControllerSpec(2, (1, 2))).ok
    rep = validate_gains(ControllerSpec(2, (1, 1.2)))
    assert not rep.errors and rep.flags
    assert validate_gains(ControllerSpec(2, (2, 1))).errors
    assert validate_gains(ControllerSpec(2, (-1, 2))).errors
    assert validate_gains(ControllerSpec(3, (1, 2, 3), 3)).flags
    assert validate_gains(ControllerSpec(3, (1, 2, 4), 2)).errors
    rep4 = validate_gains(ControllerSpec(4, (1, 2, 3, 4)))
    assert rep4.ok and rep4.advisories


def test_synthesize_gain_errors():
    with pytest.raises(GainConditionError):
        synthesize(ControllerSpec(3, (1, 1, 1)))
    with pytest.warns(UserWarning, match="despite gain errors"):
        synthesize(ControllerSpec(3, (1, 1, 1)), force=True)


def test_spec_rejects_bad_shapes():
    with pytest.raises(ValueError):
        ControllerSpec(2, (1.0,))
    with pytest.raises(ValueError):
        ControllerSpec(0, ())


specs = st.integers(1, 5).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.floats(0.1, 3.0), min_size=n, max_size=n).map(lambda v: tuple(np.cumsum(v))),
    st.integers(0, 3),
    st.sampled_from(["affine", "exp"]),
))


@settings(max_examples=30, deadline=None)
@given(specs)
def test_cancellation_random(args):
    n, lam, extra, kind = args
    sched = GainSchedule(kind, a=1.5, alpha=0.7)
    c = synthesize(ControllerSpec(n, lam, n + extra, sched))
    assert cancellation_residual(c) < 1e-10


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_structure(n):
    c = synthesize(ControllerSpec(n, tuple(range(1, n + 1))))
    assert c.S.is_unit_lower_triangular()
    prod = c.S @ c.S_inv
    for i in range(n):
        for j in range(n):
            assert prod[i, j].close_to(1.0 if i == j else 0.0, 1e-12)
    # degree of S[i, j] is the triangular number difference
    for i in range(n):
        for j in range(i):
            tri = lambda k: k * (k + 1) // 2
            assert c.S[i, j].degree == tri(i) - tri(j)


def test_sigma_roundtrip():
    c = synthesize(ControllerSpec(4, (1, 2, 3, 4)))
    x = np.random.default_rng(1).normal(size=(5, 4))
    t = np.linspace(0, 2, 5)
    back = c.state_from_sigma(t, c.sigma(t, x))
    np.testing.assert_allclose(back, x, rtol=1e-12, atol=1e-12)


def test_describe_mentions_objects():
    text = synthesize(ControllerSpec(2, (1, 2))).describe()
    assert "sigma2 = x2 + psi*x1" in text
    assert "S_inv =" in text


def test_fourth_order_printed_control_differs_by_one_term():
    # the synthesized law and an independent recursion agree; the printed
    # expansion for unit gains lacks a -5 psi^2 x2 term
    x1, x2, x3, x4 = xs(4)
    s2 = x2 + psi * x1
    s3 = x3 + psi * x2 + x1 + psi**2 * s2
    s4 = x4 + x3 * (1 + psi) * psi + x2 * (2 + psi**3) + psi**2 * x1 + 2 * psi * s2 + psi**3 * s3
    printed = (-psi**4 * s4 - x4 * (psi + psi**2 + psi**3)
               - x3 * (3 + 4 * psi + psi**3 + psi**4 + psi**5)
               - x2 * (psi**2 + 2 * psi**3 + psi**6) - 3 * psi**2 * s3
               - x1 * (4 * psi + psi**5) - 2 * s2 * (1 + psi**4))
    c = synthesize(ControllerSpec(4, (1, 1, 1, 1)), force=True)
    assert same(sym_form(c.control_form, 4), printed - 5 * psi**2 * x2)
