"""Controller configuration documents and the bundled parameter sets.

Configurations are JSON objects carrying ``"units": "Hz"``; every
frequency is converted to rad/s exactly once, in :func:`build_controller`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

from .crone import CroneConfig
from .elements import (CgLpController, make_fore, make_fosre, make_fosre_lead,
                       make_lowpass, make_pi, make_sore, make_sosre, make_sosre_lead,
                       make_tamed_derivative)
from .lti import StateSpaceSystem

__all__ = [
    "ConfigError",
    "ControllerConfig",
    "CONTROLLER_TYPES",
    "TABLE1",
    "FIG4_FOSRE",
    "FIG4_SOSRE",
    "plant",
    "build_controller",
    "crone_settings",
    "load_config",
    "dump_config",
]

TWO_PI = 2 * math.pi

CONTROLLER_TYPES = ("PID", "FORE-CgLp", "SORE-CgLp", "SOSRE-CgLp", "FOSRE-CgLp")

_COMMON = ("w_i", "w_d", "w_t", "w_f")
_REQUIRED = {
    "PID": _COMMON,
    "FORE-CgLp": _COMMON + ("w_ra", "gamma"),
    "SORE-CgLp": _COMMON + ("w_ra", "beta", "gamma"),
    "SOSRE-CgLp": _COMMON + ("w_ra", "beta", "gamma"),
    "FOSRE-CgLp": _COMMON + ("w_ra", "beta", "gamma", "lam", "w_l"),
}
_RESET_ONLY = ("w_ra", "beta", "gamma", "lam", "w_l", "alpha", "crone_w_h", "crone_n")
_HZ = ("w_i", "w_d", "w_t", "w_f", "w_ra", "w_l", "crone_w_h")


class ConfigError(ValueError):
    """Malformed or inconsistent controller configuration."""


@dataclass(frozen=True)
class ControllerConfig:
    """One controller row; frequencies in Hz.

    Fields that do not apply to ``type`` must be ``None`` (absent in JSON).
    ``kp`` and ``alpha`` are optional: when missing they are resolved by the
    tuner (``alpha`` defaults to 1 when a controller is built directly).
    """

    name: str
    type: str
    w_i: float
    w_d: float
    w_t: float
    w_f: float
    w_ra: float | None = None
    beta: float | None = None
    gamma: float | None = None
    lam: float | None = None
    w_l: float | None = None
    kp: float | None = None
    alpha: float | None = None
    crone_w_h: float | None = None
    crone_n: int | None = None

    def __post_init__(self):
        if self.type not in CONTROLLER_TYPES:
            raise ConfigError(f"unknown controller type {self.type!r}")
        need = _REQUIRED[self.type]
        for k in need:
            if getattr(self, k) is None:
                raise ConfigError(f"{self.type} requires field {k!r}")
        allowed = set(need) | {"name", "type", "kp"}
        if self.type != "PID":
            allowed |= {"alpha"}
        if self.type == "FOSRE-CgLp":
            allowed |= {"crone_w_h", "crone_n"}
        for f in fields(self):
            if f.name not in allowed and getattr(self, f.name) is not None:
                raise ConfigError(f"field {f.name!r} does not apply to {self.type}")
        for k in _HZ:
            v = getattr(self, k)
            if v is not None and not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"{k} must be a positive frequency in Hz")
        if self.gamma is not None and not -1 <= self.gamma <= 1:
            raise ConfigError(f"gamma must lie in [-1, 1], got {self.gamma}")
        if self.beta is not None and not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.lam is not None and not -1 <= self.lam <= 0:
            raise ConfigError("lam must lie in [-1, 0]")
        for k in ("kp", "alpha"):
            v = getattr(self, k)
            if v is not None and not v > 0:
                raise ConfigError(f"{k} must be positive")

    def to_dict(self) -> dict:
        out = {"units": "Hz"}
        out.update({k: v for k, v in asdict(self).items() if v is not None})
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "ControllerConfig":
        doc = dict(doc)
        if doc.pop("units", None) != "Hz":
            raise ConfigError('configuration must declare "units": "Hz"')
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown fields: {sorted(extra)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **kw) -> "ControllerConfig":
        d = asdict(self)
        d.update(kw)
        return ControllerConfig(**d)


def load_config(path_or_text) -> list:
    """Parse a JSON config: one object or ``{"controllers": [...]}``."""
    text = str(path_or_text)
    if not text.lstrip().startswith(("{", "[")):
        with open(text) as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if isinstance(doc, dict) and "controllers" in doc:
        units = doc.get("units")
        items = [dict(c, units=c.get("units", units)) for c in doc["controllers"]]
    elif isinstance(doc, list):
        items = doc
    else:
        items = [doc]
    if not all(isinstance(c, dict) for c in items):
        raise ConfigError("controllers must be JSON objects")
    return [ControllerConfig.from_dict(c) for c in items]


def dump_config(configs) -> str:
    return json.dumps({"units": "Hz",
                       "controllers": [{k: v for k, v in c.to_dict().items() if k != "units"}
                                       for c in configs]},
                      indent=2, sort_keys=True)


_LINEAR = dict(w_i=15.0, w_f=1500.0)

TABLE1 = {
    "PID": ControllerConfig("PID", "PID", w_d=32.0, w_t=705.0, **_LINEAR),
    "SOSRE-1": ControllerConfig("SOSRE-1", "SOSRE-CgLp", w_d=100.0, w_t=225.0,
                                w_ra=2.0, beta=1.0, gamma=0.2, **_LINEAR),
    "SOSRE-2": ControllerConfig("SOSRE-2", "SOSRE-CgLp", w_d=100.0, w_t=225.0,
                                w_ra=0.8, beta=1.0, gamma=0.2, **_LINEAR),
    "FOSRE-1": ControllerConfig("FOSRE-1", "FOSRE-CgLp", w_d=100.0, w_t=225.0,
                                w_ra=2.0, beta=1.0, gamma=0.2, lam=-0.4, w_l=2.5, **_LINEAR),
    "FOSRE-2": ControllerConfig("FOSRE-2", "FOSRE-CgLp", w_d=100.0, w_t=225.0,
                                w_ra=1.2, beta=1.0, gamma=0.2, lam=-0.4, w_l=1.3, **_LINEAR),
}

# stand-alone CgLp examples (the linear part is irrelevant for them)
FIG4_FOSRE = dict(w_ra=3.18, beta=1.0, alpha=0.94, w_l=0.8, lam=-0.1, gamma=0.2)
FIG4_SOSRE = dict(w_ra=6.5, beta=1.0, alpha=1.12, gamma=0.2)

# frequency of interest that sets the default CRONE band (Hz)
DEFAULT_CRONE_TOP_HZ = 500.0


def plant() -> StateSpaceSystem:
    """Lorentz-actuated flexure stage ``3.038e4 / (s^2 + 0.7413 s + 243.3)``."""
    return StateSpaceSystem([[0.0, 1.0], [-243.3, -0.7413]], [[0.0], [1.0]],
                            [[3.038e4, 0.0]], [[0.0]], ("plant", "plant"))


def crone_settings(lam: float, w_l_hz: float, w_h_hz: float | None = None,
                   n: int | None = None) -> CroneConfig:
    """CRONE band in rad/s; ``w_h`` defaults to 1000x the top frequency of
    interest and ``n`` to one section per decade plus one."""
    w_h_hz = 1000.0 * DEFAULT_CRONE_TOP_HZ if w_h_hz is None else w_h_hz
    return CroneConfig(lam, TWO_PI * w_l_hz, TWO_PI * w_h_hz, n)


def build_controller(cfg: ControllerConfig, kp: float | None = None,
                     alpha: float | None = None, gamma: float | None = None) -> CgLpController:
    """Instantiate the chain lag -> lead -> PI -> tamed derivative.

    Overrides take precedence over the config's ``kp``, ``alpha`` and
    ``gamma``; unresolved ``kp`` and ``alpha`` default to 1.
    """
    kp = cfg.kp if kp is None else kp
    kp = 1.0 if kp is None else kp
    alpha = cfg.alpha if alpha is None else alpha
    alpha = 1.0 if alpha is None else alpha
    gamma = cfg.gamma if gamma is None else gamma
    w = {k: (TWO_PI * getattr(cfg, k) if getattr(cfg, k) is not None else None) for k in _HZ}
    pi = make_pi(kp, w["w_i"])
    td = make_tamed_derivative(w["w_d"], w["w_t"])
    if cfg.type == "PID":
        return CgLpController(None, make_lowpass(w["w_f"], 2), pi, td, cfg.name)
    w_r = alpha * w["w_ra"]
    if cfg.type == "FORE-CgLp":
        lag, lead = make_fore(w["w_ra"], w_r, w["w_f"], gamma)
    elif cfg.type == "SORE-CgLp":
        lag, lead = make_sore(w["w_ra"], cfg.beta, w_r, w["w_f"], gamma)
    elif cfg.type == "SOSRE-CgLp":
        lag = make_sosre(w["w_ra"], cfg.beta, gamma)
        lead = make_sosre_lead(w_r, cfg.beta, w["w_f"], w["w_ra"])
    else:
        crone = crone_settings(cfg.lam, cfg.w_l, cfg.crone_w_h, cfg.crone_n)
        lag = make_fosre(w["w_ra"], cfg.beta, w["w_l"], cfg.lam, gamma, crone=crone)
        lead = make_fosre_lead(w_r, w["w_l"], cfg.lam, w["w_f"], crone, cfg.beta)
    return CgLpController(lag, lead, pi, td, cfg.name)
