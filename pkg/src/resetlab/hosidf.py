"""Higher-order sinusoidal-input describing functions of reset elements.

For a unit input ``sin(w t)`` the steady-state output of a reset element
holds odd harmonics ``|G_n(w)| sin(n w t + arg G_n(w))``.  This module
evaluates ``G_n`` in closed form, the reset-transparency angle ``psi`` and
the frequency at which it vanishes, and open-loop harmonic sweeps.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .elements import CgLpController, ResetSystem
from .lti import StateSpaceSystem, freq_response, matrix_exponential, series

__all__ = [
    "ResonantFrequencyError",
    "NoCrossingError",
    "HOSIDFTable",
    "theta_d",
    "describing_function",
    "psi",
    "omega_lb_ideal",
    "omega_lb_realized",
    "open_loop_hosidf",
    "hosidf_sweep",
]

# condition number beyond which Lambda or Delta_r counts as singular
_SINGULAR_COND = 1e13


class ResonantFrequencyError(ValueError):
    """Raised when Lambda(w) or Delta_r(w) is singular at the requested w."""


class NoCrossingError(ValueError):
    """Raised when psi (or the ideal fixed-point equation) has no root."""


def theta_d(rs: ResetSystem, w: float) -> np.ndarray:
    """Real matrix ``Theta_D(w)`` carrying the reset contribution.

    ``Theta_D = -(2 w^2/pi) Delta (Gamma_r - Lambda^-1)`` with
    ``Lambda = w^2 I + A^2``, ``Delta = I + e^{(pi/w) A}``,
    ``Delta_r = I + A_rho e^{(pi/w) A}`` and
    ``Gamma_r = Delta_r^-1 A_rho Delta Lambda^-1``.
    """
    if not w > 0:
        raise ValueError("w must be positive")
    A = rs.base.A
    n = A.shape[0]
    I = np.eye(n)
    A_rho = rs.A_rho
    if np.all(rs.reset_diag == 1.0):
        # Gamma_r reduces to Lambda^-1
        return np.zeros((n, n))
    E = matrix_exponential(A, math.pi / w)
    Lam = w**2 * I + A @ A
    Delta = I + E
    Delta_r = I + A_rho @ E
    if np.linalg.cond(Lam) > _SINGULAR_COND:
        raise ResonantFrequencyError(f"Lambda(w) is singular at w={w:g} rad/s")
    if np.linalg.cond(Delta_r) > _SINGULAR_COND:
        raise ResonantFrequencyError(f"Delta_r(w) is singular at w={w:g} rad/s")
    Lam_inv = np.linalg.inv(Lam)
    Gamma_r = np.linalg.solve(Delta_r, A_rho @ Delta @ Lam_inv)
    return -(2 * w**2 / math.pi) * Delta @ (Gamma_r - Lam_inv)


def describing_function(rs: ResetSystem, w: float, n: int = 1) -> complex:
    """``G_n(w)`` of a reset element for a unit sinusoidal input.

    Parameters
    ----------
    rs : ResetSystem
    w : float
        Input frequency, rad/s.
    n : int
        Harmonic order (``n >= 1``).  Even orders are identically zero.
    """
    if n < 1 or int(n) != n:
        raise ValueError("harmonic order must be a positive integer")
    if n % 2 == 0:
        return 0j
    A, B, C, D = rs.base.A, rs.base.B, rs.base.C, rs.base.D
    I = np.eye(A.shape[0])
    T = theta_d(rs, w)
    if n == 1:
        x = np.linalg.solve(1j * w * I - A, (I + 1j * T) @ B)
        return complex((C @ x + D)[0, 0])
    x = np.linalg.solve(1j * w * n * I - A, 1j * T @ B)
    return complex((C @ x)[0, 0])


def psi(rs: ResetSystem, w: float) -> float:
    """Phase (rad) of the base-linear transfer from the input to ``x2``."""
    aux = StateSpaceSystem(rs.base.A, rs.base.B, rs.aux_row, [[0.0]])
    return float(np.angle(freq_response(aux, w)[0, 0]))


def _ideal_rhs(w, w_ra, w_l, lam):
    return -w_ra**2 * ((w / w_l) ** 2 + 1) ** (lam / 2) * np.sin(lam * np.arctan(w / w_l))


def omega_lb_ideal(w_ra: float, w_l: float, lam: float) -> float:
    """Frequency (rad/s) at which an ideal FOSRE has zero ``psi``.

    Positive root of ``w = -w_ra^2 ((w/w_l)^2 + 1)^(lam/2) sin(lam atan(w/w_l))``,
    i.e. where the fractional factor's imaginary part cancels ``w/w_ra^2``.
    Returns 0 for ``lam == 0``.
    """
    if lam == 0:
        return 0.0
    if not -1 <= lam < 0:
        raise ValueError("lam must lie in [-1, 0)")
    if not (w_ra > 0 and w_l > 0):
        raise ValueError("frequencies must be positive")

    def f(w):
        return w - _ideal_rhs(w, w_ra, w_l, lam)

    # RHS is bounded by w_ra^2, so any root lies below that
    grid = np.logspace(math.log10(w_l) - 8, math.log10(max(w_ra**2, w_l)) + 1, 2001)
    vals = f(grid)
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if idx.size == 0:
        raise NoCrossingError("no linear-behavior frequency for these parameters")
    k = idx[-1]
    return brentq(f, grid[k], grid[k + 1], xtol=1e-300, rtol=1e-15, maxiter=500)


def omega_lb_realized(rs: ResetSystem, w_min: float, w_max: float,
                      points_per_decade: int = 200, rtol: float = 1e-8) -> float:
    """First zero crossing of ``psi`` of the realized element in ``[w_min, w_max]``.

    A log-spaced scan brackets the crossing; bisection refines it.

    Raises
    ------
    NoCrossingError
        If ``psi`` keeps its sign over the band.
    """
    n = max(2, int(math.ceil(points_per_decade * math.log10(w_max / w_min))) + 1)
    grid = np.logspace(math.log10(w_min), math.log10(w_max), n)
    vals = np.array([psi(rs, w) for w in grid])
    for k in range(n - 1):
        a, b = vals[k], vals[k + 1]
        # ignore +-pi wraps; a genuine crossing passes through small angles
        if a == 0.0:
            return float(grid[k])
        if np.sign(a) != np.sign(b) and abs(a) < math.pi / 2 and abs(b) < math.pi / 2:
            lo, hi = grid[k], grid[k + 1]
            flo = a
            while (hi - lo) > rtol * lo:
                mid = math.sqrt(lo * hi)
                fm = psi(rs, mid)
                if fm == 0.0:
                    return mid
                if np.sign(fm) == np.sign(flo):
                    lo, flo = mid, fm
                else:
                    hi = mid
            return math.sqrt(lo * hi)
    raise NoCrossingError(
        f"psi does not cross zero in [{w_min:g}, {w_max:g}] rad/s")


def _downstream(ctrl: CgLpController, plant: StateSpaceSystem | None) -> StateSpaceSystem:
    tail = ctrl.linear_tail()
    return tail if plant is None else series(tail, plant)


def open_loop_hosidf(ctrl: CgLpController, plant: StateSpaceSystem | None,
                     w: float, n: int = 1) -> complex:
    """``G_n`` of the open loop: lag harmonics shaped by the linear tail.

    The reset lag is the first block, so its ``n``-th output harmonic passes
    through every downstream linear block at ``n w``.
    """
    if not isinstance(ctrl, CgLpController):
        raise TypeError("open-loop composition needs a CgLpController")
    L = _downstream(ctrl, plant)
    if ctrl.lag is None:
        return complex(freq_response(L, w)[0, 0]) if n == 1 else 0j
    g = describing_function(ctrl.lag, w, n)
    if g == 0:
        return 0j
    return g * complex(freq_response(L, n * w)[0, 0])


@dataclass(frozen=True)
class HOSIDFTable:
    """Describing-function values on a frequency grid.

    ``values[i, k]`` is ``G_{orders[k]}(frequencies[i])``; ``psi`` holds the
    reset-transparency angle per frequency (NaN for linear controllers).
    """

    frequencies: np.ndarray
    orders: tuple
    values: np.ndarray
    psi: np.ndarray

    @property
    def normalized_db(self) -> np.ndarray:
        """``|G_n / G_1|`` in dB for every order."""
        g1 = np.abs(self.values[:, self.orders.index(1)]) if 1 in self.orders else None
        if g1 is None:
            raise ValueError("normalization needs the first order")
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.values) / g1[:, None])

    def column(self, n: int) -> np.ndarray:
        return self.values[:, self.orders.index(n)]

    def to_csv(self, fh=None) -> str:
        """Rows ``freq_hz, order, re, im, mag_db, phase_deg, psi_deg, norm_db``."""
        out = io.StringIO() if fh is None else fh
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["freq_hz", "order", "re", "im", "mag_db", "phase_deg",
                         "psi_deg", "norm_db"])
        norm = self.normalized_db if 1 in self.orders else np.full(self.values.shape, np.nan)
        with np.errstate(divide="ignore"):
            for i, w in enumerate(self.frequencies):
                for k, n in enumerate(self.orders):
                    g = self.values[i, k]
                    writer.writerow([
                        f"{w / (2 * math.pi):.10g}", n, f"{g.real:.10g}", f"{g.imag:.10g}",
                        f"{20 * math.log10(abs(g)) if g != 0 else -math.inf:.10g}",
                        f"{math.degrees(np.angle(g)):.10g}",
                        f"{math.degrees(self.psi[i]):.10g}",
                        f"{norm[i, k]:.10g}"])
        return out.getvalue() if fh is None else ""


def hosidf_sweep(system, frequencies, orders=(1, 3, 5), plant=None) -> HOSIDFTable:
    """Evaluate ``G_n`` over a frequency grid.

    Parameters
    ----------
    system : ResetSystem or CgLpController
        A lone element, or a controller chain (combined with ``plant`` for
        the open loop; ``plant=None`` gives the controller alone).
    frequencies : array_like
        rad/s; order is preserved.
    orders : sequence of int
    """
    freqs = np.asarray(frequencies, dtype=float)
    orders = tuple(int(n) for n in orders)
    vals = np.zeros((freqs.size, len(orders)), dtype=complex)
    psis = np.full(freqs.size, np.nan)
    if isinstance(system, ResetSystem):
        lag = system
        for i, w in enumerate(freqs):
            for k, n in enumerate(orders):
                vals[i, k] = describing_function(system, w, n)
    elif isinstance(system, CgLpController):
        lag = system.lag
        for i, w in enumerate(freqs):
            for k, n in enumerate(orders):
                vals[i, k] = open_loop_hosidf(system, plant, w, n)
    else:
        raise TypeError("system must be a ResetSystem or CgLpController")
    if lag is not None:
        psis = np.array([psi(lag, w) for w in freqs])
    return HOSIDFTable(freqs, orders, vals, psis)
