"""Bounded disturbance signals built from sinusoids and constants."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class ChannelSignal:
    """``sum_k A_k sin(w_k t + phi_k) + const + uniform_coeff * U``.

    ``U`` is one uniform [0, 1) draw per channel, made once per run from the
    seed of the enclosing DisturbanceSpec.
    """

    sines: tuple[tuple[float, float, float], ...] = ()
    const: float = 0.0
    uniform_coeff: float = 0.0

    def __post_init__(self):
        sines = tuple(
            (float(s[0]), float(s[1]), float(s[2]) if len(s) > 2 else 0.0)
            for s in self.sines
        )
        object.__setattr__(self, "sines", sines)

    def is_zero(self) -> bool:
        return (
            all(a == 0.0 for a, _, _ in self.sines)
            and self.const == 0.0
            and self.uniform_coeff == 0.0
        )

    def to_dict(self) -> dict:
        return {
            "sines": [list(s) for s in self.sines],
            "const": self.const,
            "uniform_coeff": self.uniform_coeff,
        }


@dataclass(frozen=True)
class DisturbanceSpec:
    channels: tuple[ChannelSignal, ...]
    seed: int | None = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n(self) -> int:
        return len(self.channels)

    @cached_property
    def uniforms(self) -> np.ndarray:
        """The per-channel uniform draws (fixed by the seed)."""
        return np.random.default_rng(self.seed).random(self.n)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array(
            [c.const + c.uniform_coeff * u for c, u in zip(self.channels, self.uniforms)]
        )

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.channels)

    def packed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(amps, freqs, phases, offsets)`` padded to ``(n, K)`` for compiled loops."""
        K = max([len(c.sines) for c in self.channels] + [1])
        amps = np.zeros((self.n, K))
        freqs = np.zeros((self.n, K))
        phases = np.zeros((self.n, K))
        for i, c in enumerate(self.channels):
            for k, (a, w, p) in enumerate(c.sines):
                amps[i, k], freqs[i, k], phases[i, k] = a, w, p
        return amps, freqs, phases, self.offsets.copy()

    def sup_norms(self) -> np.ndarray:
        """Per-channel ``sum |A_k| + |offset|``; exact for a single sinusoid."""
        return np.array(
            [sum(abs(a) for a, _, _ in c.sines) for c in self.channels]
        ) + np.abs(self.offsets)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "channels": [c.to_dict() for c in self.channels]}

    @classmethod
    def from_dict(cls, data: dict) -> "DisturbanceSpec":
        channels = tuple(
            ChannelSignal(
                sines=tuple(tuple(s) for s in ch.get("sines", ())),
                const=float(ch.get("const", 0.0)),
                uniform_coeff=float(ch.get("uniform_coeff", 0.0)),
            )
            for ch in data.get("channels", ())
        )
        return cls(channels, data.get("seed", 0))

    def with_seed(self, seed: int | None) -> "DisturbanceSpec":
        return DisturbanceSpec(self.channels, seed)


def zero(n: int, seed: int | None = 0) -> DisturbanceSpec:
    return DisturbanceSpec(tuple(ChannelSignal() for _ in range(n)), seed)


def third_order_disturbance(seed: int | None = 42) -> DisturbanceSpec:
    """``d1 = sin 5t``, ``d2 = sin 7t``, ``d3 = cos 3t - U``."""
    return DisturbanceSpec(
        (
            ChannelSignal(sines=((1.0, 5.0, 0.0),)),
            ChannelSignal(sines=((1.0, 7.0, 0.0),)),
            ChannelSignal(sines=((1.0, 3.0, np.pi / 2),), uniform_coeff=-1.0),
        ),
        seed,
    )


def disturbance_eval(dist: DisturbanceSpec, t) -> tuple[np.ndarray, np.ndarray]:
    """Disturbance and its analytic derivative; ``t`` may be an array."""
    t = np.asarray(t, dtype=float)
    d = np.zeros(t.shape + (dist.n,))
    dd = np.zeros(t.shape + (dist.n,))
    for i, c in enumerate(dist.channels):
        for a, w, p in c.sines:
            arg = w * t + p
            d[..., i] += a * np.sin(arg)
            dd[..., i] += a * w * np.cos(arg)
    d += dist.offsets
    return d, dd
