"""Continuous-time linear state-space systems and rational filters.

All frequencies are in rad/s.  Systems are immutable; composition returns
new objects.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.signal

__all__ = [
    "PoleOnAxisError",
    "StateSpaceSystem",
    "Factor",
    "RationalFilter",
    "freq_response",
    "series",
    "parallel",
    "static_gain",
    "matrix_exponential",
    "eigenvalues",
    "is_hurwitz",
]


class PoleOnAxisError(ValueError):
    """Raised when a frequency response is requested at a system pole."""


def _as_matrix(value, shape=None) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if shape is None else arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateSpaceSystem:
    """Linear system ``x' = A x + B u``, ``y = C x + D u``.

    Parameters
    ----------
    A, B, C, D : array_like
        State-space matrices.  A system without states uses ``A`` of shape
        ``(0, 0)`` and only ``D`` is meaningful.
    state_labels : tuple of str, optional
        Role tag per state (e.g. ``"plant"``, ``"crone"``, ``"reset"``).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    state_labels: tuple = field(default=())

    def __post_init__(self):
        D = _as_matrix(self.D)
        A = np.array(self.A, dtype=float)
        n = 0 if A.size == 0 else A.shape[0]
        p, m = D.shape
        A = _as_matrix(A.reshape(n, n))
        B = _as_matrix(np.array(self.B, dtype=float).reshape(n, m))
        C = _as_matrix(np.array(self.C, dtype=float).reshape(p, n))
        if A.shape != (n, n):
            raise ValueError("A must be square")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        labels = tuple(self.state_labels) if self.state_labels else ("",) * n
        if len(labels) != n:
            raise ValueError(f"expected {n} state labels, got {len(labels)}")
        object.__setattr__(self, "state_labels", labels)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    def freq_response(self, w: float) -> np.ndarray:
        return freq_response(self, w)

    def dc_gain(self) -> np.ndarray:
        return freq_response(self, 0.0)

    def relabel(self, label: str) -> "StateSpaceSystem":
        return StateSpaceSystem(self.A, self.B, self.C, self.D,
                                (label,) * self.n_states)

    def scaled(self, k: float) -> "StateSpaceSystem":
        """Return ``k`` times this system (output scaling)."""
        return StateSpaceSystem(self.A, self.B, k * self.C, k * self.D,
                                self.state_labels)


def static_gain(k) -> StateSpaceSystem:
    """Memoryless system ``y = k u``."""
    D = _as_matrix(k)
    return StateSpaceSystem(np.zeros((0, 0)), np.zeros((0, D.shape[1])),
                            np.zeros((D.shape[0], 0)), D)


def freq_response(sys: StateSpaceSystem, w: float) -> np.ndarray:
    """Evaluate ``C (jwI - A)^-1 B + D``.

    Raises
    ------
    PoleOnAxisError
        If ``jw`` is (numerically) an eigenvalue of ``A``.
    """
    n = sys.n_states
    if n == 0:
        return sys.D.astype(complex)
    ev = np.linalg.eigvals(sys.A)
    # a pole within rounding distance of jw
    if np.any(np.abs(ev - 1j * w) <= 1e-12 * np.maximum(1.0, np.abs(ev))):
        raise PoleOnAxisError(f"pole on the imaginary axis at w={w:g} rad/s")
    M = 1j * w * np.eye(n) - sys.A
    try:
        X = np.linalg.solve(M, sys.B.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise PoleOnAxisError(f"pole on the imaginary axis at w={w:g} rad/s") from exc
    return sys.C @ X + sys.D


def series(a: StateSpaceSystem, b: StateSpaceSystem) -> StateSpaceSystem:
    """Connect ``a`` then ``b`` (the output of ``a`` drives ``b``)."""
    if a.n_outputs != b.n_inputs:
        raise ValueError(
            f"dimension mismatch: {a.n_outputs} outputs into {b.n_inputs} inputs")
    na, nb = a.n_states, b.n_states
    A = np.zeros((na + nb, na + nb))
    A[:na, :na] = a.A
    A[na:, :na] = b.B @ a.C
    A[na:, na:] = b.A
    B = np.vstack([a.B, b.B @ a.D])
    C = np.hstack([b.D @ a.C, b.C])
    D = b.D @ a.D
    return StateSpaceSystem(A, B, C, D, a.state_labels + b.state_labels)


def parallel(a: StateSpaceSystem, b: StateSpaceSystem) -> StateSpaceSystem:
    """Sum of two systems driven by the same input."""
    if a.D.shape != b.D.shape:
        raise ValueError("parallel connection needs equal I/O dimensions")
    A = scipy.linalg.block_diag(a.A, b.A)
    B = np.vstack([a.B, b.B])
    C = np.hstack([a.C, b.C])
    return StateSpaceSystem(A, B, C, a.D + b.D, a.state_labels + b.state_labels)


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """Return ``expm(A t)`` (scaling-and-squaring with a Pade core)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix exponential needs a square matrix")
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    if A.size == 0:
        return np.zeros((0, 0))
    return scipy.linalg.expm(A * t)


def eigenvalues(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("eigenvalues need a square matrix")
    return np.linalg.eigvals(A)


def is_hurwitz(A) -> bool:
    """True iff every eigenvalue of ``A`` has a strictly negative real part."""
    ev = eigenvalues(A)
    return bool(np.all(ev.real < 0))


@dataclass(frozen=True)
class Factor:
    """Normalized first- or second-order factor.

    ``order=1``: ``s/w + 1``; ``order=2``: ``(s/w)^2 + 2 zeta s/w + 1``.
    """

    w: float
    order: int = 1
    zeta: float = 1.0

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError("corner frequency must be strictly positive")
        if self.order not in (1, 2):
            raise ValueError("factor order must be 1 or 2")

    def coeffs(self) -> np.ndarray:
        """Polynomial coefficients, highest power first."""
        if self.order == 1:
            return np.array([1.0 / self.w, 1.0])
        return np.array([1.0 / self.w**2, 2 * self.zeta / self.w, 1.0])

    def __call__(self, s):
        return np.polyval(self.coeffs(), s)


def _section(num: np.ndarray, den: np.ndarray) -> StateSpaceSystem:
    """Controllable-canonical realization of a proper SISO section."""
    num = np.trim_zeros(num, "f")
    with warnings.catch_warnings():
        # tf2ss flags tiny leading coefficients; sections are low order
        warnings.simplefilter("ignore", scipy.signal.BadCoefficients)
        A, B, C, D = scipy.signal.tf2ss(num, den)
    if A.size == 0:
        return static_gain(D)
    return StateSpaceSystem(A, B, C, D)


@dataclass(frozen=True)
class RationalFilter:
    """Gain times a ratio of normalized factors, kept in cascade form.

    Parameters
    ----------
    numerator, denominator : tuple of Factor
    gain : float
    """

    numerator: tuple = ()
    denominator: tuple = ()
    gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "numerator", tuple(self.numerator))
        object.__setattr__(self, "denominator", tuple(self.denominator))
        if self.degree(self.numerator) > self.degree(self.denominator):
            raise ValueError("improper filter: numerator degree exceeds denominator")

    @staticmethod
    def degree(factors) -> int:
        return sum(f.order for f in factors)

    def response(self, w: float) -> complex:
        s = 1j * w
        val = complex(self.gain)
        for f in self.numerator:
            val *= f(s)
        for f in self.denominator:
            val /= f(s)
        return val

    def to_state_space(self) -> StateSpaceSystem:
        """Cascade of sections, ordered by ascending denominator corner."""
        dens = sorted(self.denominator, key=lambda f: f.w)
        nums = sorted(self.numerator, key=lambda f: f.w)
        sys = static_gain(self.gain)
        for den in dens:
            num = np.array([1.0])
            # attach numerator factors of no higher total order
            for f in list(nums):
                if len(num) - 1 + f.order <= den.order:
                    num = np.polymul(num, f.coeffs())
                    nums.remove(f)
            sys = series(sys, _section(num, den.coeffs()))
        if nums:
            # greedy pairing failed (e.g. a quadratic zero over two real
            # poles); realize the whole ratio as one section
            num = np.array([self.gain])
            for f in self.numerator:
                num = np.polymul(num, f.coeffs())
            den = np.array([1.0])
            for f in self.denominator:
                den = np.polymul(den, f.coeffs())
            return _section(num, den)
        return sys

    @classmethod
    def from_state_space(cls, sys: StateSpaceSystem, tol: float = 1e-9) -> "RationalFilter":
        """Recover the factored form of a SISO system with real, stable-or-
        minimum-phase-agnostic but nonzero poles and zeros."""
        if sys.n_inputs != 1 or sys.n_outputs != 1:
            raise ValueError("only SISO systems can be factored")
        if sys.n_states == 0:
            return cls((), (), float(sys.D[0, 0]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.signal.BadCoefficients)
            z, p, k = scipy.signal.ss2zpk(sys.A, sys.B, sys.C, sys.D)
        num, kz = _factorize(z, tol)
        den, kp = _factorize(p, tol)
        # k * prod(s - z) / prod(s - p) == gain * prod(factor_z) / prod(factor_p)
        gain = float(np.real(k * kz / kp))
        return cls(num, den, gain)


def _factorize(roots: np.ndarray, tol: float):
    """Group roots into normalized factors; return (factors, scale) with
    ``prod(s - r) = scale * prod(factor(s))``."""
    factors = []
    scale = 1.0
    roots = list(roots)
    while roots:
        r = roots.pop(0)
        if abs(r.imag) <= tol * max(1.0, abs(r)):
            w = -r.real
            if w <= 0:
                raise ValueError("factor form needs roots in the open left half plane")
            factors.append(Factor(w, 1))
            scale *= w
        else:
            j = int(np.argmin([abs(q - np.conj(r)) for q in roots]))
            roots.pop(j)
            w = abs(r)
            zeta = -r.real / w
            if zeta <= 0:
                raise ValueError("factor form needs roots in the open left half plane")
            factors.append(Factor(w, 2, zeta))
            scale *= w**2
    return tuple(factors), scale
