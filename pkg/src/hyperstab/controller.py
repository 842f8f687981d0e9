"""Recursive synthesis of the time-varying feedback for an integrator chain.

Starting from ``sigma_1 = x_1``, each auxiliary variable is the nominal time
derivative of the previous one plus a damping term,
``sigma_{i+1} = omega_i + lam_i * psi**i * sigma_i``. The control cancels the
known drift of ``sigma_n`` and adds ``-lam_n * psi**m * sigma_n``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GainConditionError, SynthesisError
from .gain import GainSchedule
from .psipoly import (
    ONE,
    PolyMatrix,
    PsiPoly,
    StateLinearForm,
    format_form,
    format_matrix,
    form_nominal_derivative,
    horner_tensor,
    polymatrix_inverse_unitriangular,
)


@dataclass(frozen=True)
class ControllerSpec:
    """Order, damping gains, final exponent and gain schedule."""

    n: int
    lam: tuple[float, ...]
    m: int | None = None
    schedule: GainSchedule = field(default_factory=GainSchedule)

    def __post_init__(self):
        lam = tuple(float(v) for v in np.atleast_1d(self.lam))
        object.__setattr__(self, "lam", lam)
        if self.n < 1:
            raise ValueError("order n must be at least 1")
        if len(lam) != self.n:
            raise ValueError(f"expected {self.n} gains, got {len(lam)}")
        if self.m is None:
            object.__setattr__(self, "m", self.n)
        object.__setattr__(self, "m", int(self.m))

    @property
    def closure(self) -> tuple[float, float]:
        return self.schedule.closure

    def with_schedule(self, schedule: GainSchedule) -> "ControllerSpec":
        return ControllerSpec(self.n, self.lam, self.m, schedule)

    def to_dict(self) -> dict:
        return {"n": self.n, "lambda": list(self.lam), "m": self.m}


@dataclass(frozen=True)
class GainReport:
    errors: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()
    advisories: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors and not self.flags

    def lines(self) -> list[str]:
        out = [f"error: {e}" for e in self.errors]
        out += [f"flag: {f}" for f in self.flags]
        out += [f"advisory: {a}" for a in self.advisories]
        return out or ["ok"]


def validate_gains(spec: ControllerSpec) -> GainReport:
    """Check the gain conditions without raising.

    Hard errors: non-positive or non-increasing gains, ``m < n``. Flags: the
    explicit ratio conditions known for ``n = 2`` and ``n = 3``. For larger
    ``n`` only an advisory is emitted since no closed-form ratio is known.
    """
    lam = spec.lam
    errors, flags, advisories = [], [], []
    if any(v <= 0 for v in lam):
        errors.append("gains must be positive")
    for i in range(len(lam) - 1):
        if not lam[i + 1] > lam[i]:
            errors.append(
                f"gains must be strictly increasing: lam{i + 2}={lam[i + 1]:g} "
                f"<= lam{i + 1}={lam[i]:g}"
            )
    if spec.m < spec.n:
        errors.append(f"exponent m={spec.m} is below the order n={spec.n}")
    if spec.n in (2, 3) and not lam[1] > 1.5 * lam[0]:
        flags.append(f"lam2={lam[1]:g} <= 1.5*lam1={1.5 * lam[0]:g}")
    if spec.n == 3 and not lam[2] > 5.0 / 3.0 * lam[1]:
        flags.append(f"lam3={lam[2]:g} <= (5/3)*lam2={5.0 / 3.0 * lam[1]:g}")
    if spec.n >= 4:
        advisories.append(
            "no closed-form gain ratios are known for n >= 4; "
            "gains are only required to grow sufficiently fast"
        )
    return GainReport(tuple(errors), tuple(flags), tuple(advisories))


@dataclass(frozen=True, eq=False)
class SynthesizedController:
    spec: ControllerSpec
    sigma_forms: tuple[StateLinearForm, ...]
    omega_forms: tuple[StateLinearForm, ...]
    Omega: StateLinearForm
    control_form: StateLinearForm
    S: PolyMatrix
    S_inv: PolyMatrix

    @property
    def n(self) -> int:
        return self.spec.n

    @cached_property
    def control_coeffs(self) -> np.ndarray:
        """``(n, D)`` coefficient array of u, one row per state."""
        deg = max(p.degree for p in self.control_form.terms)
        out = np.zeros((self.n, deg + 1))
        for j, p in enumerate(self.control_form.terms):
            out[j, : len(p)] = p.coeffs
        return out

    @cached_property
    def S_coeffs(self) -> np.ndarray:
        return self.S.coeff_tensor()

    @cached_property
    def S_inv_coeffs(self) -> np.ndarray:
        return self.S_inv.coeff_tensor()

    def gain(self, t):
        return self.spec.schedule.value(t)

    def control(self, t, x):
        """Control value; ``t`` scalar or array, ``x`` with state on the last axis."""
        return eval_control(self, t, x)

    def sigma(self, t, x) -> np.ndarray:
        psi = self.gain(t)
        S = horner_tensor(self.S_coeffs, psi)
        return np.einsum("...ij,...j->...i", S, np.asarray(x, dtype=float))

    def state_from_sigma(self, t, sigma) -> np.ndarray:
        psi = self.gain(t)
        Si = horner_tensor(self.S_inv_coeffs, psi)
        return np.einsum("...ij,...j->...i", Si, np.asarray(sigma, dtype=float))

    def describe(self) -> str:
        lines = [f"n = {self.n}", f"lambda = {list(self.spec.lam)}", f"m = {self.spec.m}"]
        for i, f in enumerate(self.sigma_forms):
            lines.append(f"sigma{i + 1} = {format_form(f)}")
        for i, f in enumerate(self.omega_forms):
            lines.append(f"omega{i + 1} = {format_form(f)}")
        lines.append(f"Omega = {format_form(self.Omega)}")
        lines.append(f"u = {format_form(self.control_form)}")
        lines.append("S =")
        lines.append(format_matrix(self.S))
        lines.append("S_inv =")
        lines.append(format_matrix(self.S_inv))
        return "\n".join(lines)


def synthesize(spec: ControllerSpec, *, force: bool = False) -> SynthesizedController:
    """Build the auxiliary variables, drift cancellation and control law.

    Non-increasing gains and ``m < n`` raise GainConditionError unless
    ``force`` is set, in which case a warning is issued instead.
    """
    report = validate_gains(spec)
    if report.errors:
        msg = "; ".join(report.errors)
        if not force:
            raise GainConditionError(msg)
        warnings.warn(f"synthesizing despite gain errors: {msg}", stacklevel=2)

    n, lam, m = spec.n, spec.lam, spec.m
    closure = spec.closure
    sigma = [StateLinearForm.basis(n, 0)]
    omegas = []
    for i in range(1, n):
        omega, q = form_nominal_derivative(sigma[-1], closure)
        if not q.is_zero():
            raise SynthesisError(f"sigma{i} unexpectedly depends on x{n}")
        omegas.append(omega)
        sigma.append(omega + sigma[-1] * PsiPoly.monomial(i, lam[i - 1]))

    drift, q = form_nominal_derivative(sigma[-1], closure)
    if q != ONE:
        raise SynthesisError("input coefficient of sigma_n is not 1")
    control = -drift - sigma[-1] * PsiPoly.monomial(m, lam[-1])

    S = PolyMatrix.from_forms(sigma)
    if not S.is_unit_lower_triangular():
        raise SynthesisError("transformation matrix is not unit lower triangular")
    return SynthesizedController(
        spec=spec,
        sigma_forms=tuple(sigma),
        omega_forms=tuple(omegas),
        Omega=drift,
        control_form=control,
        S=S,
        S_inv=polymatrix_inverse_unitriangular(S),
    )


def eval_control(c: SynthesizedController, t, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != c.n:
        raise ValueError(f"state has dimension {x.shape[-1]}, expected {c.n}")
    psi = np.asarray(c.gain(t), dtype=float)
    k = horner_tensor(c.control_coeffs, psi)
    out = np.einsum("...j,...j->...", k, x)
    return float(out) if out.ndim == 0 else out


def closed_loop_sigma_n_derivative(c: SynthesizedController) -> StateLinearForm:
    """Nominal derivative of ``sigma_n`` with the control substituted."""
    drift, q = form_nominal_derivative(c.sigma_forms[-1], c.spec.closure)
    return drift + c.control_form * q


def cancellation_residual(c: SynthesizedController) -> float:
    """Largest coefficient of ``sigma_n' + lam_n psi^m sigma_n`` (0 when exact)."""
    target = c.sigma_forms[-1] * PsiPoly.monomial(c.spec.m, -c.spec.lam[-1])
    return (closed_loop_sigma_n_derivative(c) - target).max_abs()
