"""Continuous-time closed-loop simulation of the disturbed integrator chain.

Classical RK4 with a step that shrinks with the gain,
``h(t) = min(h_max, c_stab / (lam_n * psi(t)**m))``. Steps are clipped so the
integrator lands exactly on every record time.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numba
import numpy as np

from .controller import ControllerSpec, SynthesizedController, synthesize, validate_gains
from .disturbance import DisturbanceSpec, disturbance_eval
from .errors import GainConditionError, StiffnessError
from .gain import AFFINE, GainSchedule

H_MAX = 1e-3
C_STAB = 0.5
H_MIN = 1e-12


@dataclass
class Trajectory:
    """Sampled closed-loop record; arrays share the leading time axis."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    sigmas: np.ndarray
    dists: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def header(self) -> list[str]:
        n = self.n
        return (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + ["u"]
            + [f"sigma{i + 1}" for i in range(n)]
            + [f"d{i + 1}" for i in range(n)]
        )

    def table(self) -> np.ndarray:
        return np.column_stack(
            [self.times, self.states, self.controls, self.sigmas, self.dists]
        )

    def to_csv(self, path) -> None:
        np.savetxt(
            path, self.table(), delimiter=",", header=",".join(self.header()),
            comments="", fmt="%.17g",
        )

    @classmethod
    def from_csv(cls, path, meta: dict | None = None) -> "Trajectory":
        with open(path) as fh:
            cols = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = sum(1 for c in cols if c.startswith("x"))
        return cls(
            times=data[:, 0],
            states=data[:, 1 : 1 + n],
            controls=data[:, 1 + n],
            sigmas=data[:, 2 + n : 2 + 2 * n],
            dists=data[:, 2 + 2 * n : 2 + 3 * n],
            meta=dict(meta or {}),
        )

    def window(self, t_a: float, t_b: float) -> np.ndarray:
        """Boolean mask of samples with ``t_a <= t <= t_b``."""
        eps = 1e-9 * max(1.0, abs(t_b))
        return (self.times >= t_a - eps) & (self.times <= t_b + eps)


def record_grid(t_final: float, record_dt: float) -> np.ndarray:
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if not record_dt > 0:
        raise ValueError("record_dt must be positive")
    steps = t_final / record_dt
    k = int(round(steps))
    if k >= 1 and abs(steps - k) < 1e-9 * max(1.0, steps):
        return np.linspace(0.0, t_final, k + 1)
    grid = np.arange(0.0, t_final, record_dt)
    return np.append(grid, t_final)


@numba.njit(cache=True)
def _psi(t, kind, a, alpha, cap):
    if kind == 0:
        p = 1.0 + t
    else:
        p = a * np.exp(alpha * t)
    return p if p < cap else cap


@numba.njit(cache=True)
def _rhs(t, x, K, kind, a, alpha, cap, amps, freqs, phases, offsets, out):
    n = x.shape[0]
    psi = _psi(t, kind, a, alpha, cap)
    u = 0.0
    for j in range(n):
        kj = 0.0
        for k in range(K.shape[1] - 1, -1, -1):
            kj = kj * psi + K[j, k]
        u += kj * x[j]
    for i in range(n):
        di = offsets[i]
        for k in range(amps.shape[1]):
            if amps[i, k] != 0.0:
                di += amps[i, k] * np.sin(freqs[i, k] * t + phases[i, k])
        if i < n - 1:
            out[i] = x[i + 1] + di
        else:
            out[i] = u + di


@numba.njit(cache=True)
def _integrate(x0, rec, K, kind, a, alpha, cap, lam_n, m, amps, freqs, phases,
               offsets, h_max, c_stab, h_min):
    n = x0.shape[0]
    R = rec.shape[0]
    out = np.zeros((R, n))
    x = x0.copy()
    out[0] = x
    k1 = np.zeros(n)
    k2 = np.zeros(n)
    k3 = np.zeros(n)
    k4 = np.zeros(n)
    tmp = np.zeros(n)
    t = rec[0]
    steps = 0
    smallest = h_max
    for r in range(1, R):
        target = rec[r]
        while t < target:
            psi = _psi(t, kind, a, alpha, cap)
            h = c_stab / (lam_n * psi ** m)
            if h > h_max:
                h = h_max
            if h < h_min:
                return out, steps, smallest, 1, t
            if h < smallest:
                smallest = h
            land = False
            if t + h >= target - 1e-12 * (1.0 + abs(target)):
                h = target - t
                land = True
            _rhs(t, x, K, kind, a, alpha, cap, amps, freqs, phases, offsets, k1)
            for i in range(n):
                tmp[i] = x[i] + 0.5 * h * k1[i]
            _rhs(t + 0.5 * h, tmp, K, kind, a, alpha, cap, amps, freqs, phases, offsets, k2)
            for i in range(n):
                tmp[i] = x[i] + 0.5 * h * k2[i]
            _rhs(t + 0.5 * h, tmp, K, kind, a, alpha, cap, amps, freqs, phases, offsets, k3)
            for i in range(n):
                tmp[i] = x[i] + h * k3[i]
            _rhs(t + h, tmp, K, kind, a, alpha, cap, amps, freqs, phases, offsets, k4)
            for i in range(n):
                x[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
            steps += 1
            t = target if land else t + h
            for i in range(n):
                if not np.isfinite(x[i]):
                    return out, steps, smallest, 2, t
        out[r] = x
    return out, steps, smallest, 0, t


def _gain_params(schedule: GainSchedule) -> tuple[int, float, float, float]:
    kind = 0 if schedule.kind == AFFINE else 1
    cap = np.inf if schedule.cap is None else float(schedule.cap)
    return kind, float(schedule.a), float(schedule.alpha), cap


def spec_hash(spec: ControllerSpec, dist: DisturbanceSpec) -> str:
    blob = json.dumps(
        {"controller": spec.to_dict(), "gain": spec.schedule.to_dict(),
         "disturbance": dist.to_dict()},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def simulate_ct(
    spec: ControllerSpec,
    dist: DisturbanceSpec,
    x0,
    t_final: float,
    record_dt: float,
    *,
    controller: SynthesizedController | None = None,
    force: bool = False,
    h_max: float = H_MAX,
    c_stab: float = C_STAB,
) -> Trajectory:
    """Integrate the closed loop from ``x0`` and sample it on a uniform grid."""
    report = validate_gains(spec)
    if not report.ok and not force:
        raise GainConditionError("; ".join(report.errors + report.flags))
    if dist.n != spec.n:
        raise ValueError(f"disturbance has {dist.n} channels, plant has {spec.n}")
    c = controller if controller is not None else synthesize(spec, force=force)
    x0 = np.asarray(x0, dtype=float).reshape(spec.n)
    rec = record_grid(t_final, record_dt)
    kind, a, alpha, cap = _gain_params(spec.schedule)
    amps, freqs, phases, offsets = dist.packed()
    states, steps, smallest, status, t_fail = _integrate(
        x0, rec, np.ascontiguousarray(c.control_coeffs), kind, a, alpha, cap,
        float(spec.lam[-1]), float(spec.m), amps, freqs, phases, offsets,
        float(h_max), float(c_stab), H_MIN,
    )
    if status == 1:
        raise StiffnessError(f"step size fell below {H_MIN:g} at t={t_fail:.6g}", t_fail)
    if status == 2:
        raise StiffnessError(f"state became non-finite at t={t_fail:.6g}", t_fail)
    d, _ = disturbance_eval(dist, rec)
    meta = {
        "mode": "ct",
        "spec_hash": spec_hash(spec, dist),
        "seed": dist.seed,
        "uniforms": dist.uniforms.tolist(),
        "steps": int(steps),
        "h_min": float(smallest),
        "h_max": float(h_max),
        "c_stab": float(c_stab),
    }
    return Trajectory(
        times=rec,
        states=states,
        controls=np.asarray(c.control(rec, states)),
        sigmas=c.sigma(rec, states),
        dists=d,
        meta=meta,
    )


def scalar_bound(t, x0: float, d_sup: float):
    """Envelope claimed for ``x' = -(1+t) x + d``."""
    t = np.asarray(t, dtype=float)
    s = t * t / 2 + t
    return np.exp(-s) * abs(x0) + 2.0 * d_sup / (1.0 + s)


def scalar_ct_demo(
    x0: float, dist: DisturbanceSpec, t_final: float, record_dt: float = 0.01
) -> tuple[Trajectory, float]:
    """Simulate ``x' = -(1+t) x + d`` and return the worst bound violation.

    The scalar plant coincides with the first-order closed loop for unit gain
    and ``m = 1``, so the same integrator is reused.
    """
    spec = ControllerSpec(1, (1.0,), 1, GainSchedule())
    traj = simulate_ct(spec, dist, [x0], t_final, record_dt)
    bound = scalar_bound(traj.times, x0, float(dist.sup_norms()[0]))
    return traj, float(np.max(np.abs(traj.states[:, 0]) - bound))
