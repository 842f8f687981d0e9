import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperstab.gain import GainSchedule, psi_derivative, psi_value

affine = GainSchedule()
capped = GainSchedule(cap=3.0)


def test_affine_values():
    assert psi_value(affine, 0.0) == 1.0
    assert psi_value(affine, 4.0) == 5.0
    assert psi_derivative(affine, 7.0) == 1.0


def test_cap_clamps_value_and_zeroes_derivative():
    assert psi_value(capped, 10.0) == 3.0
    assert psi_derivative(capped, 10.0) == 0.0
    assert psi_value(capped, 1.0) == 2.0
    assert psi_derivative(capped, 1.0) == 1.0
    assert capped.clamp_time() == pytest.approx(2.0)


def test_exponential_values():
    g = GainSchedule("exp", a=2.0, alpha=0.5)
    assert psi_value(g, 0.0) == 2.0
    assert psi_derivative(GainSchedule("exp", a=1.0, alpha=2.0), 0.0) == 2.0
    assert g.closure == (0.0, 0.5)
    assert affine.closure == (1.0, 0.0)


def test_vectorized_matches_scalar():
    t = np.linspace(0, 20, 7)
    for g in (affine, capped, GainSchedule("exp", a=0.5, alpha=0.3, cap=40.0)):
        np.testing.assert_array_equal(g.value(t), [g.value(float(s)) for s in t])
        np.testing.assert_array_equal(g.derivative(t), [g.derivative(float(s)) for s in t])


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        GainSchedule("exp", a=-1.0, alpha=1.0)
    with pytest.raises(ValueError):
        GainSchedule("poly")
    with pytest.raises(ValueError):
        GainSchedule(cap=0.0)


@pytest.mark.parametrize(
    "g", [affine, GainSchedule("exp", a=1.5, alpha=0.2), GainSchedule("exp", a=0.1, alpha=0.05)]
)
def test_closure_matches_finite_difference(g):
    rng = np.random.default_rng(3)
    delta = 1e-6
    for t in rng.uniform(delta, 20.0, 100):
        fd = (g.value(t + delta) - g.value(t - delta)) / (2 * delta)
        scale = max(1.0, abs(g.value(t)))
        assert abs(fd - g.derivative(t)) <= 10 * delta * scale


@given(st.floats(0, 100), st.floats(0, 100))
def test_monotone(t1, t2):
    lo, hi = min(t1, t2), max(t1, t2)
    for g in (affine, capped):
        assert g.value(lo) <= g.value(hi)
    # strict growth only above rounding resolution of 1 + t
    if hi - lo > 1e-12 * (1 + hi):
        assert affine.value(hi) > affine.value(lo)


@given(st.floats(0, 1e6), st.floats(0.5, 100))
def test_capped_gain_is_bounded(t, cap):
    assert GainSchedule(cap=cap).value(t) <= cap
