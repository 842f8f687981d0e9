"""Monotone time-varying gains psi(t) with an optional saturation cap."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AFFINE = "affine"
EXPONENTIAL = "exp"


@dataclass(frozen=True)
class GainSchedule:
    """Gain ``psi(t)`` whose derivative is affine in ``psi``.

    ``kind="affine"`` gives ``psi = 1 + t``; ``kind="exp"`` gives
    ``psi = a * exp(alpha * t)``. With ``cap`` set, the effective gain is
    ``min(psi(t), cap)``.
    """

    kind: str = AFFINE
    a: float = 1.0
    alpha: float = 1.0
    cap: float | None = None

    def __post_init__(self):
        if self.kind not in (AFFINE, EXPONENTIAL):
            raise ValueError(f"unknown gain kind {self.kind!r}")
        if self.kind == EXPONENTIAL and not (self.a > 0 and self.alpha > 0):
            raise ValueError("exponential gain needs a > 0 and alpha > 0")
        if self.cap is not None and not self.cap > 0:
            raise ValueError("saturation cap must be positive")

    @property
    def closure(self) -> tuple[float, float]:
        """Pair ``(c0, c1)`` with ``dpsi/dt = c0 + c1 * psi``."""
        if self.kind == AFFINE:
            return (1.0, 0.0)
        return (0.0, float(self.alpha))

    @property
    def psi0(self) -> float:
        return 1.0 if self.kind == AFFINE else float(self.a)

    def raw(self, t):
        """Unclamped gain."""
        t = np.asarray(t, dtype=float)
        if self.kind == AFFINE:
            out = 1.0 + t
        else:
            out = self.a * np.exp(self.alpha * t)
        return out if out.ndim else float(out)

    def value(self, t):
        """Effective gain, clamped at the cap when one is set."""
        out = self.raw(t)
        if self.cap is None:
            return out
        return np.minimum(out, self.cap) if np.ndim(out) else min(out, self.cap)

    def derivative(self, t):
        """Time derivative of the effective gain (0 on the clamped branch)."""
        raw = np.asarray(self.raw(t), dtype=float)
        c0, c1 = self.closure
        out = c0 + c1 * raw
        if self.cap is not None:
            out = np.where(raw >= self.cap, 0.0, out)
        return out if out.ndim else float(out)

    def clamp_time(self) -> float:
        """First time at which the cap engages (inf without a cap)."""
        if self.cap is None or self.cap <= self.psi0:
            return 0.0 if self.cap is not None else float("inf")
        if self.kind == AFFINE:
            return self.cap - 1.0
        return float(np.log(self.cap / self.a) / self.alpha)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == EXPONENTIAL:
            out.update(a=self.a, alpha=self.alpha)
        if self.cap is not None:
            out["cap"] = self.cap
        return out


def psi_value(schedule: GainSchedule, t):
    return schedule.value(t)


def psi_derivative(schedule: GainSchedule, t):
    return schedule.derivative(t)
