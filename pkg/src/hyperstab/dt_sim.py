"""Implicit-Euler discretization of the closed loop in auxiliary coordinates.

With ``t_k = h k`` the backward step of ``sigma' = M sigma + L d`` reads
``zeta_{k+1} = Z(t_{k+1}) (zeta_k + h L(t_{k+1}) d_{k+1})`` where
``Z = (I - h M)^{-1}`` is upper triangular with closed-form entries
``Z_ij = h^(j-i) / (rho_i ... rho_j)`` and ``rho_i = 1 + h lam_i psi^i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numba
import numpy as np

from .controller import ControllerSpec, SynthesizedController, synthesize
from .ct_sim import Trajectory, spec_hash
from .disturbance import DisturbanceSpec, disturbance_eval
from .psipoly import PolyMatrix, horner_tensor
from .sigma import SigmaSystem, build_sigma_system

SCHEMES = ("sigma", "literal")


@dataclass(frozen=True, eq=False)
class DtSystem:
    spec: ControllerSpec
    h: float
    controller: SynthesizedController = field(repr=False)
    sigma_system: SigmaSystem = field(repr=False)

    @property
    def n(self) -> int:
        return self.spec.n

    def time(self, k):
        return self.h * np.asarray(k, dtype=float)

    @cached_property
    def powers(self) -> np.ndarray:
        """Exponent of psi on each diagonal slot of M."""
        n = self.n
        return np.array([i + 1 for i in range(n - 1)] + [self.spec.m], dtype=float)


def make_dt_system(spec: ControllerSpec, h: float, *, force: bool = False) -> DtSystem:
    if spec.m != spec.n:
        raise ValueError(f"the discrete scheme requires m = n, got m={spec.m}, n={spec.n}")
    if not h > 0:
        raise ValueError("step h must be positive")
    c = synthesize(spec, force=force)
    return DtSystem(spec, float(h), c, build_sigma_system(spec, c))


def rho(sys: DtSystem, t) -> np.ndarray:
    """``1 + h lam_i psi(t)^i`` for each slot, state on the last axis."""
    psi = np.asarray(sys.spec.schedule.value(t), dtype=float)[..., None]
    return 1.0 + sys.h * np.asarray(sys.spec.lam) * psi ** sys.powers


def resolvent_Z(sys: DtSystem, t) -> np.ndarray:
    """Closed-form ``(I - h M(t))^{-1}``; array ``t`` adds leading axes."""
    r = rho(sys, t)
    n = sys.n
    Z = np.zeros(r.shape[:-1] + (n, n))
    for i in range(n):
        acc = 1.0 / r[..., i]
        Z[..., i, i] = acc
        for j in range(i + 1, n):
            acc = acc * sys.h / r[..., j]
            Z[..., i, j] = acc
    return Z


def _S(sys, t):
    return horner_tensor(sys.controller.S_coeffs, sys.spec.schedule.value(t))


def _S_inv(sys, t):
    return horner_tensor(sys.controller.S_inv_coeffs, sys.spec.schedule.value(t))


def _L(sys, t):
    return horner_tensor(sys.sigma_system.L_coeffs, sys.spec.schedule.value(t))


def dt_sigma_step(sys: DtSystem, zeta_k, k: int, d_next) -> np.ndarray:
    t1 = sys.h * (k + 1)
    rhs = np.asarray(zeta_k, dtype=float) + sys.h * _L(sys, t1) @ np.asarray(d_next, dtype=float)
    return resolvent_Z(sys, t1) @ rhs


def dt_state_step(sys: DtSystem, xi_k, k: int, d_next) -> np.ndarray:
    """``S^{-1} Z (S xi_k + h L d_{k+1})`` with every matrix taken at ``t_{k+1}``."""
    t1 = sys.h * (k + 1)
    zeta = _S(sys, t1) @ np.asarray(xi_k, dtype=float)
    return _S_inv(sys, t1) @ dt_sigma_step(sys, zeta, k, d_next)


@numba.njit(cache=True)
def _affine_loop(A, b, v0):
    """``v_{k+1} = A_k v_k + b_k`` for a stack of matrices."""
    K, n = b.shape
    out = np.empty((K + 1, n))
    out[0] = v0
    v = v0.copy()
    w = np.empty(n)
    for k in range(K):
        for i in range(n):
            s = b[k, i]
            for j in range(n):
                s += A[k, i, j] * v[j]
            w[i] = s
        v[:] = w
        out[k + 1] = v
    return out


@numba.njit(cache=True)
def _ratio_loop(A, v0):
    """Per-step norm ratios of ``v_{k+1} = A_k v_k`` with renormalization."""
    K, n, _ = A.shape
    ratios = np.empty(K)
    v = v0 / np.sqrt(np.sum(v0 * v0))
    w = np.empty(n)
    for k in range(K):
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += A[k, i, j] * v[j]
            w[i] = s
        nrm = np.sqrt(np.sum(w * w))
        ratios[k] = nrm
        if nrm == 0.0:
            for r in range(k + 1, K):
                ratios[r] = 0.0
            break
        v[:] = w / nrm
    return ratios


def simulate_dt(
    spec_or_sys,
    dist: DisturbanceSpec,
    x0,
    t_final: float,
    h: float | None = None,
    *,
    scheme: str = "sigma",
    force: bool = False,
) -> Trajectory:
    """Run the implicit-Euler closed loop for ``round(t_final / h)`` steps.

    ``scheme="sigma"`` iterates the auxiliary vector and maps every sample back
    with ``S^{-1}(t_k)``; this is consistent with the continuous loop.
    ``scheme="literal"`` iterates the state update
    ``S^{-1} Z (S xi_k + h L d)`` with all matrices at ``t_{k+1}``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    sys = spec_or_sys if isinstance(spec_or_sys, DtSystem) else make_dt_system(
        spec_or_sys, h, force=force
    )
    if dist.n != sys.n:
        raise ValueError(f"disturbance has {dist.n} channels, plant has {sys.n}")
    K = int(round(t_final / sys.h))
    if K < 1:
        raise ValueError("t_final must cover at least one step")
    times = sys.h * np.arange(K + 1)
    d, _ = disturbance_eval(dist, times)
    t1 = times[1:]
    Z = resolvent_Z(sys, t1)
    ZL = np.einsum("kij,kjl->kil", Z, _L(sys, t1))
    b = sys.h * np.einsum("kij,kj->ki", ZL, d[1:])
    x0 = np.asarray(x0, dtype=float).reshape(sys.n)
    S_all = _S(sys, times)
    Si_all = _S_inv(sys, times)
    if scheme == "sigma":
        zeta = _affine_loop(Z, b, S_all[0] @ x0)
        states = np.einsum("kij,kj->ki", Si_all, zeta)
    else:
        A = np.einsum("kij,kjl,kln->kin", Si_all[1:], Z, S_all[1:])
        states = _affine_loop(A, np.einsum("kij,kj->ki", Si_all[1:], b), x0)
    c = sys.controller
    meta = {
        "mode": "dt",
        "scheme": scheme,
        "spec_hash": spec_hash(sys.spec, dist),
        "seed": dist.seed,
        "uniforms": dist.uniforms.tolist(),
        "h": sys.h,
        "steps": K,
    }
    return Trajectory(
        times=times,
        states=states,
        controls=np.asarray(c.control(times, states)),
        sigmas=np.einsum("kij,kj->ki", S_all, states),
        dists=d,
        meta=meta,
    )


def contraction_ratios(sys: DtSystem, zeta0, K: int) -> np.ndarray:
    """``|zeta_{k+1}| / |zeta_k|`` for the disturbance-free recursion, k = 0..K-1."""
    t1 = sys.h * np.arange(1, K + 1)
    return _ratio_loop(resolvent_Z(sys, t1), np.asarray(zeta0, dtype=float))


def ratio_threshold(ratios: np.ndarray, level: float = 0.1) -> int | None:
    """Smallest index past which every ratio stays below ``level``."""
    above = np.flatnonzero(ratios >= level)
    if above.size == 0:
        return 0
    k0 = int(above[-1]) + 1
    return k0 if k0 < ratios.size else None


def expected_limit(n: int, h: float) -> np.ndarray:
    """Strictly lower-triangular limit with entries ``-h^-(i-j)`` below the diagonal."""
    N = np.zeros((n, n))
    for i in range(n):
        for j in range(i):
            N[i, j] = -(h ** -(i - j))
    return N


def _exact_eval(P: PolyMatrix, psi: Fraction) -> list[list[Fraction]]:
    out = []
    for row in P.rows:
        vals = []
        for e in row:
            acc = Fraction(0)
            for c in reversed(e.coeffs):
                acc = acc * psi + Fraction(c)
            vals.append(acc)
        out.append(vals)
    return out


def _exact_matmul(A, B):
    n = len(A)
    return [[sum((A[i][k] * B[k][j] for k in range(n)), Fraction(0)) for j in range(n)]
            for i in range(n)]


@dataclass
class LimitReport:
    n: int
    h: float
    t_probe: float
    SZS: np.ndarray
    SZL: np.ndarray
    expected: np.ndarray
    deviation_SZS: float
    deviation_SZL: float

    @property
    def max_deviation(self) -> float:
        return max(self.deviation_SZS, self.deviation_SZL)


def relative_deviation(P: np.ndarray, N: np.ndarray) -> float:
    """Largest entrywise deviation, relative to ``|N_ij|`` or to ``max |N|`` where ``N_ij = 0``."""
    scale = np.max(np.abs(N)) if np.any(N) else 1.0
    denom = np.where(N != 0, np.abs(N), scale)
    return float(np.max(np.abs(P - N) / denom))


def limit_matrices(sys: DtSystem, t_probe: float = 1e4) -> LimitReport:
    """Evaluate ``S^-1 Z S`` and ``S^-1 Z L`` at ``t_probe`` against the nilpotent limit.

    The products are formed in exact rational arithmetic from the float
    coefficients, since the entries of S grow like high powers of psi and
    cancel heavily in floating point.
    """
    psi = Fraction(float(sys.spec.schedule.value(t_probe)))
    h = Fraction(sys.h)
    n = sys.n
    rho_ = [1 + h * Fraction(sys.spec.lam[i]) * psi ** int(sys.powers[i]) for i in range(n)]
    Z = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        acc = 1 / rho_[i]
        Z[i][i] = acc
        for j in range(i + 1, n):
            acc = acc * h / rho_[j]
            Z[i][j] = acc
    S = _exact_eval(sys.controller.S, psi)
    Si = _exact_eval(sys.controller.S_inv, psi)
    L = _exact_eval(sys.sigma_system.L, psi)
    SiZ = _exact_matmul(Si, Z)
    to_np = lambda A: np.array([[float(v) for v in row] for row in A])
    SZS = to_np(_exact_matmul(SiZ, S))
    SZL = to_np(_exact_matmul(SiZ, L))
    N = expected_limit(n, sys.h)
    return LimitReport(
        n, sys.h, float(t_probe), SZS, SZL, N,
        relative_deviation(SZS, N), relative_deviation(SZL, N),
    )


def scalar_dt_demo(x0: float, d, K: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Iterate ``x_{k+1} = (x_k + d_k) / (1 + k)`` and compare with its envelope.

    Returns the iterates ``x_0..x_K``, the bound at ``k = 1..K`` and the worst
    violation ``max(|x_k| - bound_k)``.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    d = np.asarray(d, dtype=float)
    d = np.full(K, float(d)) if d.ndim == 0 else d[:K]
    if d.size < K:
        raise ValueError("disturbance sequence shorter than K")
    xs = np.empty(K + 1)
    xs[0] = x0
    for k in range(K):
        xs[k + 1] = (xs[k] + d[k]) / (1 + k)
    d_sup = float(np.max(np.abs(d))) if d.size else 0.0
    ks = np.arange(1, K + 1)
    geometric = np.cumsum(2.0 ** -(ks - 2.0))
    bound = abs(x0) * np.exp(-np.array([math.lgamma(k + 1.0) for k in ks])) + d_sup / ks * geometric
    return xs, bound, float(np.max(np.abs(xs[1:]) - bound))
