"""Quantitative checks: the convolution bound, explicit third-order bounds,
decay envelopes and steady-state residuals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .ct_sim import Trajectory
from .disturbance import DisturbanceSpec, disturbance_eval
from .errors import AdmissibilityError, GainConditionError


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-12, rel: float = 1e-13,
                     max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature with Richardson correction.

    An interval is accepted when ``|S_left + S_right - S_whole| <= 15 * eps``
    with ``eps = max(tol_local, rel * |S|)``; the local tolerance halves at
    every split.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a_, b_, fa_, fm_, fb_, s, eps, depth = stack.pop()
        m_ = 0.5 * (a_ + b_)
        lm, rm = 0.5 * (a_ + m_), 0.5 * (m_ + b_)
        flm, frm = f(lm), f(rm)
        left = (m_ - a_) / 6.0 * (fa_ + 4.0 * flm + fm_)
        right = (b_ - m_) / 6.0 * (fm_ + 4.0 * frm + fb_)
        diff = left + right - s
        if depth >= max_depth or abs(diff) <= 15.0 * max(eps, rel * abs(left + right)):
            total += left + right + diff / 15.0
        else:
            stack.append((a_, m_, fa_, flm, fm_, left, 0.5 * eps, depth + 1))
            stack.append((m_, b_, fm_, frm, fb_, right, 0.5 * eps, depth + 1))
    return sign * total


def _kernel_integral(a: float, alpha: float, lo: float, hi: float, tau: float,
                     tol: float) -> float:
    """``int_lo^hi exp(s - tau) (a s + 1)^-alpha ds``, split on the 1/a scale."""
    f = lambda s: math.exp(s - tau) * (a * s + 1.0) ** (-alpha)
    if hi <= lo:
        return -_kernel_integral(a, alpha, hi, lo, tau, tol) if hi < lo else 0.0
    cuts = [lo]
    edge = lo + 1.0 / a
    while edge < hi and len(cuts) < 8:
        cuts.append(edge)
        edge = lo + 8.0 * (edge - lo)
    cuts.append(hi)
    return sum(adaptive_simpson(f, x0, x1, tol) for x0, x1 in zip(cuts[:-1], cuts[1:]))


def lemma1_r(a: float, alpha: float, *, strict: bool = True) -> float:
    """Constant ``r_{a, alpha}`` of the convolution bound.

    Requires ``a * alpha > 1``. With ``strict=False`` inadmissible pairs are
    evaluated anyway (the integral then runs over a negative interval).
    """
    if not (a > 0 and alpha > 0):
        raise AdmissibilityError("a and alpha must be positive")
    aa = a * alpha
    if aa <= 1 and strict:
        raise AdmissibilityError(f"a*alpha = {aa:g} must exceed 1")
    c = (aa - 1.0) / a
    integral = _kernel_integral(a, alpha, 0.0, c, c, 1e-13)
    return (
        aa ** alpha * integral
        + (aa + 1.0)
        + ((aa + 1.0) / aa) ** alpha * (1.0 - math.exp(-1.0 / a))
    )


@dataclass(frozen=True)
class Lemma1Params:
    a: float
    alpha: float
    r: float

    @classmethod
    def build(cls, a: float, alpha: float) -> "Lemma1Params":
        return cls(float(a), float(alpha), lemma1_r(a, alpha))


def lemma1_lhs(a: float, alpha: float, tau_grid) -> np.ndarray:
    """``int_0^tau exp(s - tau) (a s + 1)^-alpha ds`` on an increasing grid.

    Uses ``I(tau') = exp(tau - tau') I(tau) + int_tau^tau' ...`` between
    consecutive grid points.
    """
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(taus) < 0) or (taus.size and taus[0] < 0):
        raise ValueError("tau grid must be nonnegative and increasing")
    out = np.empty_like(taus)
    prev_tau, prev = 0.0, 0.0
    for k, tau in enumerate(taus):
        piece = _kernel_integral(a, alpha, prev_tau, tau, tau, 1e-14)
        prev = math.exp(prev_tau - tau) * prev + piece
        prev_tau = tau
        out[k] = prev
    return out


def lemma1_check(a: float, alpha: float, tau_grid) -> float:
    """Largest ``LHS(tau) - r / (a tau + 1)^alpha`` over the grid (<= 0 when the bound holds)."""
    r = lemma1_r(a, alpha)
    taus = np.asarray(tau_grid, dtype=float)
    lhs = lemma1_lhs(a, alpha, taus)
    return float(np.max(lhs - r / (a * taus + 1.0) ** alpha))


def _ratio(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10**6)


@dataclass
class Theorem2Bounds:
    """Explicit bounds on ``|x1(t)|`` and ``|x2(t)|`` for the third-order loop with ``m = 4``.

    Constants ``r_{a, alpha}`` with ``a * alpha <= 1`` fall outside the range
    where the convolution bound is proven; they are evaluated anyway and
    listed in ``inadmissible``.
    """

    lam: tuple[float, float, float]
    r: dict = field(default_factory=dict)
    inadmissible: set = field(default_factory=set)

    def __post_init__(self):
        l1, l2, l3 = self.lam = tuple(float(v) for v in self.lam)
        if not (2 * l2 > 3 * l1 and 3 * l3 > 5 * l2):
            raise GainConditionError("bounds need 2*lam2 > 3*lam1 and 3*lam3 > 5*lam2")
        for key in self.keys():
            a, alpha = key[0] / self.lam[key[1]], float(key[2])
            if a * alpha <= 1:
                self.inadmissible.add(key)
            self.r[key] = lemma1_r(a, alpha, strict=False)

    @staticmethod
    def keys():
        """``(numerator, gain index, alpha)`` so that ``a = numerator / lam[index]``."""
        F = Fraction
        k5 = [(5, 2, F(j, 5)) for j in (1, 2, 3, 4)]
        k3 = [(3, 1, v) for v in (F(1, 3), F(2, 3), F(1), F(4, 3), F(5, 3), F(2))]
        k2 = [(2, 0, v) for v in (F(1, 2), F(3, 2), F(2), F(5, 2), F(3), F(7, 2))]
        return k5 + k3 + k2

    def _r5(self, num, den):
        return self.r[(5, 2, Fraction(num, den))]

    def _r3(self, num, den):
        return self.r[(3, 1, Fraction(num, den))]

    def _r2(self, num, den):
        return self.r[(2, 0, Fraction(num, den))]

    def terms_used(self, channel: int) -> set:
        """Keys of the r-constants multiplying ``||d_channel||`` (1-based)."""
        F = Fraction
        used = {
            1: {(5, 2, F(1, 5)), (3, 1, F(1)), (2, 0, F(2)), (5, 2, F(4, 5)), (3, 1, F(2)),
                (2, 0, F(7, 2)), (3, 1, F(1, 3)), (2, 0, F(1, 2))},
            2: {(5, 2, F(3, 5)), (3, 1, F(5, 3)), (2, 0, F(3)), (5, 2, F(2, 5)),
                (3, 1, F(4, 3)), (2, 0, F(5, 2)), (3, 1, F(2, 3)), (2, 0, F(3, 2))},
            3: {(5, 2, F(4, 5)), (3, 1, F(2)), (2, 0, F(7, 2))},
        }
        return used[channel]

    def required_inadmissible(self, d_norms) -> set:
        """Inadmissible constants that actually enter for the given disturbance sizes."""
        out = set()
        for i, dn in enumerate(d_norms, start=1):
            if dn != 0:
                out |= self.terms_used(i) & self.inadmissible
        return out

    def _E1(self, t):
        return np.exp(-self.lam[0] * t * (t + 2.0) / 2.0)

    def _E2(self, t):
        return np.exp(-self.lam[1] * t * (t * t / 3.0 + t + 1.0))

    def A(self, t):
        l1, l2, l3 = self.lam
        E1 = self._E1(t)
        return (E1, 3 * E1 / (2 * l2 - 3 * l1),
                15 * E1 / ((3 * l3 - 5 * l2) * (2 * l2 - 3 * l1)))

    def B(self, t):
        l1, l2, l3 = self.lam
        psi = 1.0 + np.asarray(t, dtype=float)
        r5, r3, r2 = self._r5, self._r3, self._r2
        B1 = (
            l2 * r5(1, 5) * r3(1, 1) * r2(2, 1) / psi**4
            + r5(4, 5) * r3(2, 1) * r2(7, 2) / psi**7
            + l3 * r3(1, 3) * r2(1, 2) / psi
            + l2 * l3 * r2(1, 2) / (l1 * psi)
        ) / (l3 * l2)
        B2 = (
            l1 * r5(3, 5) * r3(5, 3) * r2(3, 1) / psi**6
            + l2 * r5(2, 5) * r3(4, 3) * r2(5, 2) / psi**5
            + l3 * r3(2, 3) * r2(3, 2) / psi**3
        ) / (l2 * l3 * l1)
        B3 = r5(4, 5) * r3(2, 1) * r2(7, 2) / (l1 * l2 * l3 * psi**7)
        return B1, B2, B3

    def C(self, t):
        l1, l2, l3 = self.lam
        psi = 1.0 + np.asarray(t, dtype=float)
        E1, E2 = self._E1(t), self._E2(t)
        return (
            l1 * psi * E1,
            E2 + l1 * psi * 3 * E1 / (2 * l2 - 3 * l1),
            5 * E2 / (3 * l3 - 5 * l2)
            + 15 * l1 * psi * E1 / ((3 * l3 - 5 * l2) * (2 * l2 - 3 * l1)),
        )

    def D(self, t):
        l1, l2, l3 = self.lam
        psi = 1.0 + np.asarray(t, dtype=float)
        r5, r3, r2 = self._r5, self._r3, self._r2
        D1 = l1 / (l3 * l2) * (
            l2 * r5(1, 5) * r3(1, 1) / psi**3
            + r5(4, 5) * r3(2, 1) / psi**6
            + l3 * r3(1, 3) / psi
            + l2 * r5(1, 5) * r3(1, 1) * r2(2, 1) / psi**3
            + r5(4, 5) * r3(2, 1) * r2(7, 2) / psi**6
            + l3 * r3(1, 3) * r2(1, 2)
            + l2 * l3 * r2(1, 2) / l1
        )
        D2 = (
            l1 * r5(3, 5) * r3(5, 3) / psi**5
            + l2 * r5(2, 5) * r3(4, 3) / psi**4
            + l3 * r3(2, 3) / psi**2
            + l1 * r5(3, 5) * r3(5, 3) * r2(3, 1) / psi**5
            + l2 * r5(2, 5) * r3(4, 3) * r2(5, 2) / psi**4
            + l3 * r3(2, 3) * r2(3, 2) / psi**2
        ) / (l2 * l3)
        D3 = r5(4, 5) * r3(2, 1) / (l2 * l3 * psi**6) * (1.0 + r2(7, 2))
        return D1, D2, D3

    @staticmethod
    def _combine(init, dist, x1_0, s2_0, s3_0, d_norms):
        ic = abs(x1_0) * init[0] + abs(s2_0) * init[1] + abs(s3_0) * init[2]
        dn = [float(v) for v in d_norms]
        return ic + sum(w * c for w, c in zip(dn, dist) if w != 0)

    def x1(self, t, x1_0, s2_0, s3_0, d_norms=(0.0, 0.0, 0.0)):
        return self._combine(self.A(t), self.B(t), x1_0, s2_0, s3_0, d_norms)

    def x2(self, t, x1_0, s2_0, s3_0, d_norms=(0.0, 0.0, 0.0)):
        return self._combine(self.C(t), self.D(t), x1_0, s2_0, s3_0, d_norms)


def theorem2_bounds(lam) -> Theorem2Bounds:
    return Theorem2Bounds(tuple(lam))


def theorem2_x1_bound(lam, t, x1_0, sigma2_0, sigma3_0, d_norms):
    return Theorem2Bounds(tuple(lam)).x1(t, x1_0, sigma2_0, sigma3_0, d_norms)


def theorem2_x2_bound(lam, t, x1_0, sigma2_0, sigma3_0, d_norms):
    return Theorem2Bounds(tuple(lam)).x2(t, x1_0, sigma2_0, sigma3_0, d_norms)


@dataclass(frozen=True)
class EnvelopeSpec:
    """``exp(-(c t + kappa0) t) * rho_scale * |x0|``."""

    kappa0: float
    kappa_coeff: float
    rho_scale: float

    def log_value(self, t, x0_norm: float):
        t = np.asarray(t, dtype=float)
        return math.log(self.rho_scale * x0_norm) - (self.kappa_coeff * t + self.kappa0) * t


def envelope_check(traj: Trajectory, component: int, env: EnvelopeSpec,
                   t_min: float = 0.0) -> float:
    """Largest ``log|x_component| - log(envelope)`` over ``t >= t_min`` (0-based component).

    Returns ``-inf`` when the component vanishes identically.
    """
    if np.any(traj.dists != 0):
        raise ValueError("envelope checks apply to disturbance-free trajectories")
    mask = traj.times >= t_min
    x0_norm = float(np.linalg.norm(traj.states[0]))
    vals = np.abs(traj.states[mask, component])
    if x0_norm == 0 or not np.any(vals > 0):
        return -math.inf
    with np.errstate(divide="ignore"):
        logs = np.log(vals)
    return float(np.max(logs - env.log_value(traj.times[mask], x0_norm)))


def steady_state_residuals(traj: Trajectory, dist: DisturbanceSpec,
                           window: tuple[float, float]) -> np.ndarray:
    """Sups of ``|x1|``, ``|x2 + d1|`` and ``|x3 + d2 + d1'|`` over the window."""
    t_a, t_b = window
    if not (t_b > t_a >= 0) or t_b > traj.times[-1] + 1e-9 or t_a < traj.times[0] - 1e-9:
        raise ValueError(f"window {window} outside trajectory span")
    mask = traj.window(t_a, t_b)
    x = traj.states[mask]
    d, dd = disturbance_eval(dist, traj.times[mask])
    res = [np.abs(x[:, 0])]
    if traj.n >= 2:
        res.append(np.abs(x[:, 1] + d[:, 0]))
    if traj.n >= 3:
        res.append(np.abs(x[:, 2] + d[:, 1] + dd[:, 0]))
    return np.array([float(np.max(r)) for r in res])


def saturation_tail_bound(d1_sup: float, lam1: float, cap: float | None, t_a: float,
                          margin: float = 1.1) -> float:
    """Tail level ``eps`` for ``|x1|`` on ``t >= t_a`` under a capped gain.

    Once the loop is quasi-static, ``sigma_1' = -lam1 psi sigma_1 + sigma_2 + d1``
    settles at ``(d1 + sigma_2) / (lam1 psi)``; ``margin`` absorbs the small
    ``sigma_2`` contribution. The effective gain is ``min(cap, 1 + t_a)``.
    """
    psi = 1.0 + t_a if cap is None else min(cap, 1.0 + t_a)
    return margin * d1_sup / (lam1 * psi)
