"""Closed-loop dynamics in the auxiliary coordinates.

Along the disturbed plant the auxiliary vector obeys
``sigma' = M(psi) sigma + L(psi) d`` with M upper bidiagonal and L unit
lower triangular. L is read off from the derivative of each sigma_i, and the
remaining drift is checked against the expected bidiagonal structure.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .controller import ControllerSpec, SynthesizedController, synthesize
from .errors import SynthesisError
from .psipoly import (
    ONE,
    PolyMatrix,
    PsiPoly,
    ZERO,
    StateLinearForm,
    form_disturbed_derivative,
    format_matrix,
    horner_tensor,
)

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SigmaSystem:
    spec: ControllerSpec
    M: PolyMatrix
    L: PolyMatrix
    residual: float

    @property
    def n(self) -> int:
        return self.spec.n

    @cached_property
    def M_coeffs(self) -> np.ndarray:
        return self.M.coeff_tensor()

    @cached_property
    def L_coeffs(self) -> np.ndarray:
        return self.L.coeff_tensor()

    def describe(self) -> str:
        return "M =\n" + format_matrix(self.M) + "\nL =\n" + format_matrix(self.L)


def drift_matrix(spec: ControllerSpec) -> PolyMatrix:
    """Upper bidiagonal M with diagonal ``-lam_i psi^i`` (``-lam_n psi^m`` last)."""
    n = spec.n
    rows = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        power = i + 1 if i < n - 1 else spec.m
        rows[i][i] = PsiPoly.monomial(power, -spec.lam[i])
        if i < n - 1:
            rows[i][i + 1] = ONE
    return PolyMatrix(rows)


def build_sigma_system(
    spec: ControllerSpec, controller: SynthesizedController | None = None, *, force=False
) -> SigmaSystem:
    """Derive M and L by differentiating each sigma_i along the disturbed plant."""
    c = controller if controller is not None else synthesize(spec, force=force)
    n = spec.n
    M = drift_matrix(spec)
    L_rows = []
    residual = 0.0
    for i, f in enumerate(c.sigma_forms):
        drift, q, dist = form_disturbed_derivative(f, spec.closure)
        if not q.is_zero():
            drift = drift + c.control_form * q
        expected = StateLinearForm.zero(n)
        for j in range(n):
            if M.rows[i][j]:
                expected = expected + c.sigma_forms[j] * M.rows[i][j]
        residual = max(residual, (drift - expected).max_abs())
        L_rows.append(dist)
    if residual > RESIDUAL_TOL * max(1.0, c.S.max_abs()):
        raise SynthesisError(f"sigma drift residual {residual:.3g} is not zero")
    L = PolyMatrix(L_rows)
    if not L.is_unit_lower_triangular():
        raise SynthesisError("disturbance matrix is not unit lower triangular")
    return SigmaSystem(spec=spec, M=M, L=L, residual=residual)


def sigma_rhs(sys: SigmaSystem, t, sigma, d) -> np.ndarray:
    psi = sys.spec.schedule.value(t)
    M = horner_tensor(sys.M_coeffs, psi)
    L = horner_tensor(sys.L_coeffs, psi)
    sigma = np.asarray(sigma, dtype=float)
    d = np.asarray(d, dtype=float)
    return np.einsum("...ij,...j->...i", M, sigma) + np.einsum("...ij,...j->...i", L, d)
