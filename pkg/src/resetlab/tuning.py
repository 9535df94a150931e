"""Loop shaping and FOSRE tuning.

Margins are evaluated on the first-order describing function of the open
loop.  ``tune_fosre`` follows the usual rule of thumb: start from
``lam = -0.1`` and ``beta = 1``, fit ``w_l`` and ``w_ra`` so that ``psi``
stays small below ``w_lb`` and vanishes at ``w_lb``, and step ``beta`` down
(then ``lam``) until ``psi(w_c) < -85 deg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .crone import CroneConfig
from .elements import CgLpController, ResetSystem, make_fosre
from .hosidf import describing_function, open_loop_hosidf, psi
from .lti import StateSpaceSystem, freq_response

__all__ = [
    "NoCrossoverError",
    "UnreachableTargetError",
    "TuneSpec",
    "TuneResult",
    "phase_margin_df",
    "crossover_df",
    "pick_kp",
    "flatten_alpha",
    "pick_gamma",
    "tune_fosre",
    "psi_objective",
]


class NoCrossoverError(ValueError):
    """The open-loop DF gain does not cross one in the scanned band."""


class UnreachableTargetError(ValueError):
    """The requested phase margin is outside what ``gamma`` can deliver."""


def _g1(ctrl, plant, w):
    if isinstance(ctrl, CgLpController):
        return open_loop_hosidf(ctrl, plant, w, 1)
    # plain linear system
    return complex(freq_response(ctrl, w)[0, 0]) * (
        1.0 if plant is None else complex(freq_response(plant, w)[0, 0]))


def crossover_df(ctrl, plant, w_min: float = 2 * math.pi * 1.0,
                 w_max: float = 2 * math.pi * 1e4, points: int = 400) -> float:
    """Highest frequency (rad/s) where ``|G1_OL|`` falls through one."""
    grid = np.logspace(math.log10(w_min), math.log10(w_max), points)
    mags = np.array([abs(_g1(ctrl, plant, w)) for w in grid]) - 1.0
    idx = np.flatnonzero((mags[:-1] >= 0) & (mags[1:] < 0))
    if idx.size == 0:
        raise NoCrossoverError("no gain crossover in the scanned band")
    k = idx[-1]

    def f(lw):
        return abs(_g1(ctrl, plant, math.exp(lw))) - 1.0

    return math.exp(brentq(f, math.log(grid[k]), math.log(grid[k + 1]), xtol=1e-12))


def phase_margin_df(ctrl, plant, w_c: float | None = None) -> float:
    """``180 + arg G1_OL(w_c)`` in degrees, wrapped to ``(-180, 180]``.

    ``w_c`` defaults to :func:`crossover_df`.
    """
    if w_c is None:
        w_c = crossover_df(ctrl, plant)
    pm = 180.0 + math.degrees(np.angle(_g1(ctrl, plant, w_c)))
    return (pm + 180.0) % 360.0 - 180.0 if pm > 180.0 else pm


def pick_kp(ctrl: CgLpController, plant: StateSpaceSystem, w_c: float) -> float:
    """Gain ``kp`` putting the DF crossover at ``w_c``.

    ``G1_OL`` is proportional to ``kp`` (the PI block follows the lag and
    reset elements are homogeneous), so one evaluation suffices.
    """
    g = abs(_g1(ctrl, plant, w_c))
    if g == 0 or not np.isfinite(g):
        raise NoCrossoverError("open loop has zero gain at the target crossover")
    return ctrl.kp / g


def flatten_alpha(lag: ResetSystem, make_lead: Callable[[float], StateSpaceSystem],
                  band, n_points: int = 50, bounds=(0.5, 2.0), tol: float = 1e-6) -> float:
    """Lead corner ratio ``alpha = w_r / w_ra`` giving the flattest CgLp gain.

    Minimizes the worst deviation of ``|G1_lag(w) D_alpha(jw)|`` from the
    pair's DC gain over ``n_points`` log-spaced frequencies in ``band``,
    by golden-section search on ``bounds``.

    Parameters
    ----------
    make_lead : callable
        ``alpha -> StateSpaceSystem`` building the lead with
        ``w_r = alpha w_ra``.
    band : (float, float)
        rad/s.
    """
    w = np.logspace(math.log10(band[0]), math.log10(band[1]), n_points)
    g1 = np.array([describing_function(lag, wi, 1) for wi in w])
    lag_dc = abs(freq_response(lag.base, 0.0)[0, 0])

    def cost(alpha):
        lead = make_lead(alpha)
        dc = lag_dc * abs(freq_response(lead, 0.0)[0, 0])
        mag = np.abs(g1 * np.array([freq_response(lead, wi)[0, 0] for wi in w]))
        return float(np.max(np.abs(20 * np.log10(mag / dc))))

    res = minimize_scalar(cost, bounds=bounds, method="bounded",
                          options={"xatol": tol})
    return float(res.x)


def pick_gamma(build: Callable[[float], CgLpController], plant: StateSpaceSystem,
               pm_target: float, w_c: float, tol: float = 1e-6) -> float:
    """``gamma`` in ``[-1, 1]`` whose DF phase margin at ``w_c`` is ``pm_target``.

    ``build(gamma)`` returns the controller; ``kp`` is re-picked for every
    candidate so the crossover stays at ``w_c``.  The margin is assumed
    monotone in ``gamma`` over the range (bisection).
    """
    def pm(g):
        c = build(g)
        c = c.with_kp(pick_kp(c, plant, w_c))
        return phase_margin_df(c, plant, w_c) - pm_target

    hi = pm(1.0)
    if abs(hi) <= tol:
        return 1.0
    lo = pm(-1.0)
    if np.sign(lo) == np.sign(hi):
        raise UnreachableTargetError(
            f"phase margin {pm_target} deg not reachable for gamma in [-1, 1]")
    return float(brentq(pm, -1.0, 1.0, xtol=tol))


# ------------------------------------------------------------- FOSRE recipe

@dataclass(frozen=True)
class TuneSpec:
    """Targets for the FOSRE recipe (rad/s, degrees).

    ``band_decades`` sets the low band ``[w_lb 10^-band_decades, w_lb]``
    over which ``max |psi|`` is minimized.
    """

    w_lb: float
    w_c: float
    pm_target: float = 45.0
    max_evals: int = 400
    band_decades: float = 2.0
    n_band: int = 50
    crone_top: float | None = None
    psi_c_limit: float = -85.0
    psi_lb_tol: float = 0.5
    lam0: float = -0.1
    beta0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.w_lb < self.w_c:
            raise ValueError("need 0 < w_lb < w_c")
        if not 0 < self.pm_target < 90:
            raise ValueError("pm_target must lie in (0, 90) degrees")


@dataclass
class TuneResult:
    """FOSRE parameters (rad/s) and search diagnostics."""

    w_ra: float
    beta: float
    w_l: float
    lam: float
    objective: float
    psi_lb: float
    psi_c: float
    converged: bool
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("w_ra", "beta", "w_l", "lam", "objective", "psi_lb", "psi_c", "converged")}


def _element(spec: TuneSpec, w_ra, beta, w_l, lam) -> ResetSystem:
    top = spec.crone_top if spec.crone_top is not None else 1000.0 * spec.w_c
    return make_fosre(w_ra, beta, w_l, lam, 1.0,
                      crone=CroneConfig(lam, w_l, max(top, 100.0 * w_l)))


def psi_objective(rs: ResetSystem, w_lb: float, band_decades: float = 2.0,
                  n: int = 50) -> float:
    """``max |psi|`` (deg) over ``n`` log points in ``[w_lb 10^-d, w_lb]``."""
    w = np.logspace(math.log10(w_lb) - band_decades, math.log10(w_lb), n)
    return float(np.max(np.abs(np.degrees([psi(rs, wi) for wi in w]))))


def _fit(spec: TuneSpec, beta: float, lam: float, rng):
    """Fit ``(w_l, w_ra)`` for fixed ``beta`` and ``lam`` (log coordinates)."""
    penalty = 1e3

    def cost(p):
        w_l, w_ra = np.exp(p)
        try:
            rs = _element(spec, w_ra, beta, w_l, lam)
            obj = psi_objective(rs, spec.w_lb, spec.band_decades, spec.n_band)
            plb = abs(math.degrees(psi(rs, spec.w_lb)))
        except (ValueError, np.linalg.LinAlgError):
            return 1e9
        return obj + penalty * max(0.0, plb - 0.5 * spec.psi_lb_tol) ** 2

    # restart grid around w_lb (w_l in decades below, w_ra near w_lb)
    starts = [(spec.w_lb * a, spec.w_lb * b)
              for a in (1e-2, 1e-1, 1.0) for b in (0.3, 1.0)]
    starts += [tuple(spec.w_lb * 10 ** rng.uniform(-2, 0.5, 2)) for _ in range(2)]
    best = None
    for k, (wl0, wr0) in enumerate(starts):
        res = minimize(cost, np.log([wl0, wr0]), method="Nelder-Mead",
                       options={"maxfev": max(20, spec.max_evals // len(starts)),
                                "xatol": 1e-6, "fatol": 1e-8})
        if best is None or (res.fun, k) < (best[0], best[1]):
            best = (float(res.fun), k, res.x)
    w_l, w_ra = np.exp(best[2])
    return float(w_l), float(w_ra)


def tune_fosre(spec: TuneSpec) -> TuneResult:
    """Rule-of-thumb FOSRE tuning.

    ``beta`` drops by 0.1 while ``psi(w_c) >= -85 deg``; on reaching zero,
    ``lam`` drops by 0.1 and ``beta`` restarts at its initial value.  The
    first parameter set meeting the ``psi(w_c)`` limit and
    ``|psi(w_lb)| < psi_lb_tol`` is returned with ``converged=True``;
    otherwise the best set seen is returned unconverged.

    Raises
    ------
    ValueError
        For ``lam0 == 0``, which has no frequency of linear behavior.
    """
    if spec.lam0 == 0:
        raise ValueError("lam = 0 gives no frequency of linear behavior")
    rng = np.random.default_rng(spec.seed)
    lam = spec.lam0
    history = []
    best = None
    while lam >= -1.0 - 1e-12:
        beta = spec.beta0
        while beta > 1e-9:
            w_l, w_ra = _fit(spec, beta, lam, rng)
            rs = _element(spec, w_ra, beta, w_l, lam)
            obj = psi_objective(rs, spec.w_lb, spec.band_decades, spec.n_band)
            plb = math.degrees(psi(rs, spec.w_lb))
            pc = math.degrees(psi(rs, spec.w_c))
            row = TuneResult(w_ra, beta, w_l, lam, obj, plb, pc, False)
            history.append(row.as_dict())
            ok_lb = abs(plb) < spec.psi_lb_tol
            if ok_lb and pc < spec.psi_c_limit:
                row.converged = True
                row.history = history
                return row
            if ok_lb and (best is None or pc < best.psi_c):
                best = row
            beta = round(beta - 0.1, 10)
        lam = round(lam - 0.1, 10)
    if best is None:
        best = min((TuneResult(**{**h, "converged": False}) for h in history),
                   key=lambda r: abs(r.psi_lb))
    best.history = history
    best.converged = False
    return best
