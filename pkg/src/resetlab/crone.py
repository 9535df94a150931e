"""CRONE (Oustaloup) approximation of the fractional factor (s/w_l + 1)^lam.

The chain ``C * prod (1 + s/w_z,m) / (1 + s/w_p,m)`` places ``N`` real
zeros and poles at equal logarithmic spacing between ``w_l`` and ``w_h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lti import StateSpaceSystem

__all__ = [
    "InsufficientSectionsError",
    "CroneConfig",
    "ZeroPoleGain",
    "crone_place",
    "normalize_dc",
    "realize_crone",
    "fractional_response",
    "approximation_error",
    "minimum_sections",
]


class InsufficientSectionsError(ValueError):
    """Raised when fewer sections than (decades + 1) are requested."""


def minimum_sections(w_l: float, w_h: float) -> int:
    """Smallest admissible section count: one more than the decade count."""
    return math.ceil(math.log10(w_h / w_l) - 1e-9) + 1


@dataclass(frozen=True)
class CroneConfig:
    """Parameters of a CRONE chain.

    Parameters
    ----------
    lam : float
        Exponent of the approximated factor, in ``[-1, 0]``.  ``0`` gives a
        degenerate chain with coincident zeros and poles.
    w_l, w_h : float
        Lower and upper corner of the approximation band, rad/s.
    n_sections : int, optional
        Number of zero/pole pairs.  Defaults to decades + 1.
    """

    lam: float
    w_l: float
    w_h: float
    n_sections: int | None = None

    def __post_init__(self):
        if not -1.0 <= self.lam <= 0.0:
            raise ValueError(f"lam must lie in [-1, 0], got {self.lam}")
        if not 0 < self.w_l < self.w_h:
            raise ValueError("need 0 < w_l < w_h")
        need = minimum_sections(self.w_l, self.w_h)
        if self.n_sections is None:
            object.__setattr__(self, "n_sections", need)
        elif self.n_sections < need:
            raise InsufficientSectionsError(
                f"{self.n_sections} sections cover {math.log10(self.w_h / self.w_l):.2f} "
                f"decades; at least {need} are required")

    @property
    def decades(self) -> float:
        return math.log10(self.w_h / self.w_l)


@dataclass(frozen=True)
class ZeroPoleGain:
    """Real zeros and poles (as positive corner frequencies) and a gain."""

    zeros: np.ndarray
    poles: np.ndarray
    gain: float = 1.0

    def __post_init__(self):
        z = np.asarray(self.zeros, dtype=float)
        p = np.asarray(self.poles, dtype=float)
        if z.shape != p.shape:
            raise ValueError("zeros and poles must pair up")
        if np.any(z <= 0) or np.any(p <= 0):
            raise ValueError("corner frequencies must be strictly positive")
        object.__setattr__(self, "zeros", z)
        object.__setattr__(self, "poles", p)

    def response(self, w):
        s = 1j * np.asarray(w, dtype=float)[..., None]
        terms = (1 + s / self.zeros) / (1 + s / self.poles)
        return self.gain * np.prod(terms, axis=-1)

    def inverse(self) -> "ZeroPoleGain":
        """The reciprocal chain (zeros and poles swapped)."""
        return ZeroPoleGain(self.poles, self.zeros, 1.0 / self.gain)


def crone_place(cfg: CroneConfig) -> ZeroPoleGain:
    """Place the zeros and poles of the chain and normalize its DC gain."""
    N = cfg.n_sections
    m = np.arange(1, N + 1)
    ratio = cfg.w_h / cfg.w_l
    zeros = cfg.w_l * ratio ** ((2 * m - 1 - cfg.lam) / (2 * N))
    poles = cfg.w_l * ratio ** ((2 * m - 1 + cfg.lam) / (2 * N))
    return normalize_dc(ZeroPoleGain(zeros, poles, 1.0))


def normalize_dc(zpk: ZeroPoleGain) -> ZeroPoleGain:
    """Choose the gain so the chain has unit response at DC.

    ``(s/w_l + 1)^lam`` equals one at ``s = 0``, so the chain must too.
    """
    dc = abs(ZeroPoleGain(zpk.zeros, zpk.poles, 1.0).response(0.0))
    return ZeroPoleGain(zpk.zeros, zpk.poles, 1.0 / dc)


def realize_crone(zpk: ZeroPoleGain, label: str = "crone") -> StateSpaceSystem:
    """Cascade of first-order sections, lowest pole first.

    Section ``(1 + s/z)/(1 + s/p)`` is realized as ``x' = -p x + p v``,
    ``y = (p/z) v + (1 - p/z) x``.
    """
    order = np.argsort(zpk.poles, kind="stable")
    z = zpk.zeros[order]
    p = zpk.poles[order]
    N = len(p)
    A = np.zeros((N, N))
    B = np.zeros((N, 1))
    # running output of the cascade: c_row @ x + d * u
    c_row = np.zeros(N)
    d = float(zpk.gain)
    for k in range(N):
        A[k, :] += p[k] * c_row
        A[k, k] -= p[k]
        B[k, 0] = p[k] * d
        r = p[k] / z[k]
        c_row = r * c_row
        c_row[k] += 1 - r
        d = r * d
    return StateSpaceSystem(A, B, c_row[None, :], [[d]], (label,) * N)


def fractional_response(lam: float, w_l: float, w):
    """Exact ``(jw/w_l + 1)^lam`` (principal branch)."""
    return (1j * np.asarray(w, dtype=float) / w_l + 1.0) ** lam


def approximation_error(cfg: CroneConfig, n_points: int = 50):
    """Worst gain (dB) and phase (deg) error of the chain against the exact
    factor over ``n_points`` log-spaced frequencies in ``[w_l, w_h/10]``.
    """
    w = np.logspace(math.log10(cfg.w_l), math.log10(cfg.w_h / 10), n_points)
    approx = crone_place(cfg).response(w)
    exact = fractional_response(cfg.lam, cfg.w_l, w)
    gain_err = np.abs(20 * np.log10(np.abs(approx) / np.abs(exact)))
    phase_err = np.abs(np.degrees(np.angle(approx / exact)))
    return float(gain_err.max()), float(phase_err.max())
