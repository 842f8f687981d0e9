"""TOML experiment configuration with field-level diagnostics."""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .controller import ControllerSpec
from .disturbance import ChannelSignal, DisturbanceSpec
from .gain import GainSchedule

MODES = ("ct", "dt")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _get(data: dict, key: str, kind, default=None, required=False):
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.get(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{key}: expected a table")
    if parts[-1] not in node:
        if required:
            raise ConfigError(f"{key}: missing required field")
        return default
    value = node[parts[-1]]
    try:
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind is list:
            if not isinstance(value, list):
                raise TypeError
            return [float(v) for v in value]
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None
    return value


@dataclass
class ExperimentConfig:
    """One closed-loop run: controller, gain, disturbance, mode and horizon.

    Units: time in seconds of the model clock; ``h`` is the implicit-Euler
    step (dt mode), ``record_dt`` the sampling interval (ct mode).
    """

    n: int
    lam: tuple[float, ...]
    m: int | None = None
    gain: GainSchedule = field(default_factory=GainSchedule)
    disturbance: DisturbanceSpec | None = None
    mode: str = "ct"
    h: float = 1e-3
    scheme: str = "sigma"
    record_dt: float = 1e-2
    t_final: float = 10.0
    x0: tuple[float, ...] = ()
    out: str = "runs/out"
    force: bool = False

    def __post_init__(self):
        self.lam = tuple(float(v) for v in self.lam)
        self.x0 = tuple(float(v) for v in self.x0) or tuple([0.0] * self.n)
        if self.disturbance is None:
            self.disturbance = DisturbanceSpec(tuple(ChannelSignal() for _ in range(self.n)), 0)
        self._validate()

    def _validate(self):
        if self.n < 1:
            raise ConfigError("controller.n: must be at least 1")
        if len(self.lam) != self.n:
            raise ConfigError(f"controller.lambda: expected {self.n} values, got {len(self.lam)}")
        if len(self.x0) != self.n:
            raise ConfigError(f"x0: expected {self.n} values, got {len(self.x0)}")
        if self.disturbance.n != self.n:
            raise ConfigError(
                f"disturbance.channel: expected {self.n} channels, got {self.disturbance.n}"
            )
        if self.mode not in MODES:
            raise ConfigError(f"mode: expected one of {MODES}, got {self.mode!r}")
        if not self.t_final > 0:
            raise ConfigError("t_final: must be positive")
        if self.mode == "dt" and not self.h > 0:
            raise ConfigError("dt.h: must be positive")
        if self.mode == "ct" and not self.record_dt > 0:
            raise ConfigError("ct.record_dt: must be positive")
        if self.scheme not in ("sigma", "literal"):
            raise ConfigError(f"dt.scheme: expected 'sigma' or 'literal', got {self.scheme!r}")

    @property
    def seed(self):
        return self.disturbance.seed

    @property
    def spec(self) -> ControllerSpec:
        return ControllerSpec(self.n, self.lam, self.m, self.gain)

    def to_dict(self) -> dict:
        gain = {"kind": self.gain.kind}
        if self.gain.kind == "exp":
            gain.update(a=self.gain.a, alpha=self.gain.alpha)
        if self.gain.cap is not None:
            gain["cap"] = self.gain.cap
        controller = {"n": self.n, "lambda": list(self.lam)}
        if self.m is not None:
            controller["m"] = self.m
        dist = {"channel": [c.to_dict() for c in self.disturbance.channels]}
        if self.disturbance.seed is not None:
            dist["seed"] = self.disturbance.seed
        return {
            "mode": self.mode,
            "t_final": self.t_final,
            "x0": list(self.x0),
            "out": self.out,
            "force": self.force,
            "controller": controller,
            "gain": gain,
            "dt": {"h": self.h, "scheme": self.scheme},
            "ct": {"record_dt": self.record_dt},
            "disturbance": dist,
        }

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        out = copy.copy(self)
        out.disturbance = self.disturbance.with_seed(seed)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        n = _get(data, "controller.n", int, required=True)
        lam = _get(data, "controller.lambda", list, required=True)
        m = _get(data, "controller.m", int)
        kind = _get(data, "gain.kind", str, "affine")
        if kind not in ("affine", "exp"):
            raise ConfigError(f"gain.kind: expected 'affine' or 'exp', got {kind!r}")
        try:
            gain = GainSchedule(
                kind=kind,
                a=_get(data, "gain.a", float, 1.0),
                alpha=_get(data, "gain.alpha", float, 1.0),
                cap=_get(data, "gain.cap", float),
            )
        except ValueError as exc:
            raise ConfigError(f"gain: {exc}") from None
        raw_channels = data.get("disturbance", {}).get("channel", [])
        channels = []
        for i, ch in enumerate(raw_channels):
            sines = ch.get("sines", [])
            if not all(isinstance(s, list) and len(s) in (2, 3) for s in sines):
                raise ConfigError(
                    f"disturbance.channel[{i}].sines: expected [amplitude, frequency, phase?] lists"
                )
            channels.append(
                ChannelSignal(
                    sines=tuple(tuple(float(v) for v in s) for s in sines),
                    const=_get(ch, "const", float, 0.0),
                    uniform_coeff=_get(ch, "uniform_coeff", float, 0.0),
                )
            )
        if not channels:
            channels = [ChannelSignal() for _ in range(n)]
        seed = data.get("disturbance", {}).get("seed", 0)
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            raise ConfigError(f"disturbance.seed: expected int, got {seed!r}")
        return cls(
            n=n,
            lam=tuple(lam),
            m=m,
            gain=gain,
            disturbance=DisturbanceSpec(tuple(channels), seed),
            mode=_get(data, "mode", str, "ct"),
            h=_get(data, "dt.h", float, 1e-3),
            scheme=_get(data, "dt.scheme", str, "sigma"),
            record_dt=_get(data, "ct.record_dt", float, 1e-2),
            t_final=_get(data, "t_final", float, 10.0),
            x0=tuple(_get(data, "x0", list, [0.0] * n)),
            out=_get(data, "out", str, "runs/out"),
            force=bool(data.get("force", False)),
        )

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"TOML syntax error: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        try:
            return cls.from_toml(text)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def third_order_config(seed: int = 42, h: float = 1e-3, t_final: float = 10.0,
                    scheme: str = "literal", out: str = "runs/third_order_dt") -> ExperimentConfig:
    """Third-order example with unit gains and the three-channel disturbance."""
    from .disturbance import third_order_disturbance

    return ExperimentConfig(
        n=3, lam=(1.0, 1.0, 1.0), m=3, gain=GainSchedule(),
        disturbance=third_order_disturbance(seed), mode="dt", h=h, scheme=scheme,
        t_final=t_final, x0=(1.0, 1.0, 1.0), out=out, force=True,
    )


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)
