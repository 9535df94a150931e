"""Reset elements and their CgLp compositions.

A reset element is a linear base system whose states are multiplied by a
diagonal reset matrix whenever its input crosses zero.  Constructors here
cover first-order (FORE), second-order (SORE), second-order single-state
(SOSRE) and fractional-order single-state (FOSRE) elements, plus the linear
lead filters that pair with each one to form a CgLp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crone import CroneConfig, ZeroPoleGain, crone_place, realize_crone
from .lti import Factor, RationalFilter, StateSpaceSystem, series

__all__ = [
    "ResetSystem",
    "CgLpController",
    "base_linear",
    "make_fore",
    "make_sore",
    "make_sosre",
    "make_sosre_lead",
    "make_fosre",
    "make_fosre_lead",
    "make_pi",
    "make_tamed_derivative",
    "make_lowpass",
    "fosre_crone",
]


@dataclass(frozen=True)
class ResetSystem:
    """Linear base system plus a diagonal reset matrix.

    Parameters
    ----------
    base : StateSpaceSystem
        SISO base linear system (input ``e``, output ``u``).
    reset_diag : array_like
        Diagonal of the reset matrix; entries in ``[-1, 1]``.
    aux_state : int
        Index of the state tapped as the auxiliary output ``x2`` (the state
        whose phase relative to ``e`` decides reset transparency).
    name : str
    resettable : tuple of int, optional
        States designated to reset, kept even when their coefficient is 1.
        Defaults to the states whose coefficient differs from 1.
    """

    base: StateSpaceSystem
    reset_diag: np.ndarray
    aux_state: int = 0
    name: str = ""
    resettable: tuple = None

    def __post_init__(self):
        diag = np.array(self.reset_diag, dtype=float).ravel()
        if diag.shape != (self.base.n_states,):
            raise ValueError("reset matrix must match the base state dimension")
        if np.any(np.abs(diag) > 1):
            raise ValueError("reset coefficients must lie in [-1, 1]")
        if self.base.n_inputs != 1 or self.base.n_outputs != 1:
            raise ValueError("reset elements are SISO")
        if not 0 <= self.aux_state < self.base.n_states:
            raise ValueError("auxiliary state index out of range")
        diag.setflags(write=False)
        object.__setattr__(self, "reset_diag", diag)
        if self.resettable is None:
            object.__setattr__(self, "resettable",
                               tuple(int(i) for i in np.flatnonzero(diag != 1.0)))
        else:
            object.__setattr__(self, "resettable", tuple(int(i) for i in self.resettable))

    @property
    def A_rho(self) -> np.ndarray:
        return np.diag(self.reset_diag)

    @property
    def reset_state_indices(self) -> list:
        return [i for i, g in enumerate(self.reset_diag) if g != 1.0]

    @property
    def n_states(self) -> int:
        return self.base.n_states

    @property
    def aux_row(self) -> np.ndarray:
        """Output row selecting ``x2`` from the state vector."""
        row = np.zeros((1, self.n_states))
        row[0, self.aux_state] = 1.0
        return row

    def with_gamma(self, gamma: float) -> "ResetSystem":
        """Same element with every resetting entry replaced by ``gamma``."""
        _check_gamma(gamma)
        diag = np.ones(self.n_states)
        diag[list(self.resettable)] = gamma
        return ResetSystem(self.base, diag, self.aux_state, self.name, self.resettable)


def base_linear(rs: ResetSystem) -> StateSpaceSystem:
    """The element with resets disabled."""
    return rs.base


def make_pi(kp: float, w_i: float) -> StateSpaceSystem:
    """``kp (1 + w_i/s)``."""
    return StateSpaceSystem([[0.0]], [[1.0]], [[kp * w_i]], [[kp]], ("pi",))


def make_tamed_derivative(w_d: float, w_t: float) -> StateSpaceSystem:
    """``(s/w_d + 1)/(s/w_t + 1)``."""
    return RationalFilter((Factor(w_d),), (Factor(w_t),)).to_state_space().relabel("derivative")


def make_lowpass(w_f: float, order: int = 2) -> StateSpaceSystem:
    """``1/((s/w_f)^2 + 2 s/w_f + 1)`` (or first order ``1/(s/w_f + 1)``)."""
    return RationalFilter((), (Factor(w_f, order),)).to_state_space().relabel("lowpass")


def _check_gamma(gamma):
    if not -1.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [-1, 1], got {gamma}")


def _check_positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


def make_fore(w_ra: float, w_r: float, w_f: float, gamma: float):
    """FORE CgLp: reset lag ``1/(s/w_ra + 1)`` and lead ``(s/w_r+1)/(s/w_f+1)``.

    Returns
    -------
    (ResetSystem, StateSpaceSystem)
    """
    _check_positive(w_ra=w_ra, w_r=w_r, w_f=w_f)
    _check_gamma(gamma)
    lag = StateSpaceSystem([[-w_ra]], [[w_ra]], [[1.0]], [[0.0]], ("reset",))
    lead = RationalFilter((Factor(w_r),), (Factor(w_f),)).to_state_space().relabel("lead")
    return ResetSystem(lag, [gamma], 0, "FORE", (0,)), lead


def make_sore(w_ra: float, beta: float, w_r: float, w_f: float, gamma: float):
    """SORE CgLp: second-order reset lag (both states reset) and its lead."""
    _check_positive(w_ra=w_ra, beta=beta, w_r=w_r, w_f=w_f)
    _check_gamma(gamma)
    A = [[0.0, 1.0], [-w_ra**2, -2 * beta * w_ra]]
    lag = StateSpaceSystem(A, [[0.0], [w_ra**2]], [[1.0, 0.0]], [[0.0]],
                           ("reset", "reset"))
    lead = RationalFilter((Factor(w_r, 2, beta),), (Factor(w_f, 2, 1.0),))
    return ResetSystem(lag, [gamma, gamma], 1, "SORE", (0, 1)), lead.to_state_space().relabel("lead")


def make_sosre(w_ra: float, beta: float, gamma: float) -> ResetSystem:
    """Second-order single-state reset element.

    Base system ``A = [[0, 1], [-w_ra^2, -2 beta w_ra]]``, ``B = [0; 1]``,
    ``C = [w_ra, 0]``; only the second state (``x2``) resets.
    """
    _check_positive(w_ra=w_ra, beta=beta)
    _check_gamma(gamma)
    base = StateSpaceSystem([[0.0, 1.0], [-w_ra**2, -2 * beta * w_ra]],
                            [[0.0], [1.0]], [[w_ra, 0.0]], [[0.0]],
                            ("linear", "reset"))
    return ResetSystem(base, [1.0, gamma], 1, "SOSRE", (1,))


def make_sosre_lead(w_r: float, beta: float, w_f: float, w_ra: float) -> StateSpaceSystem:
    """Lead paired with a SOSRE lag.

    The second-order lead of the SORE CgLp, scaled by ``w_ra`` because the
    SOSRE output has DC gain ``1/w_ra``.
    """
    _check_positive(w_r=w_r, beta=beta, w_f=w_f, w_ra=w_ra)
    lead = RationalFilter((Factor(w_r, 2, beta),), (Factor(w_f, 2, 1.0),), gain=w_ra)
    return lead.to_state_space().relabel("lead")


def fosre_crone(lam: float, w_l: float, w_h: float, n_sections: int | None = None) -> ZeroPoleGain:
    return crone_place(CroneConfig(lam, w_l, w_h, n_sections))


def make_fosre(w_ra: float, beta: float, w_l: float, lam: float, gamma: float,
               crone: CroneConfig | None = None, w_h: float | None = None) -> ResetSystem:
    """Fractional-order single-state reset element.

    State order is ``[x2, crone states]``.  ``x2`` integrates
    ``e - 2 beta w_ra x2 - w_ra^2 x1`` where ``x1`` is the CRONE chain output
    driven by ``x2``; the element output is ``w_ra^2 x1``.  Only ``x2``
    resets.

    Parameters
    ----------
    crone : CroneConfig, optional
        Chain settings; its ``lam`` and ``w_l`` must agree with the
        arguments.  When omitted a chain up to ``w_h`` is built.
    """
    _check_positive(w_ra=w_ra, beta=beta, w_l=w_l)
    _check_gamma(gamma)
    if crone is None:
        if w_h is None:
            raise ValueError("pass either a CroneConfig or w_h")
        crone = CroneConfig(lam, w_l, w_h)
    if not (np.isclose(crone.lam, lam) and np.isclose(crone.w_l, w_l)):
        raise ValueError("CRONE configuration disagrees with lam / w_l")
    chain = realize_crone(crone_place(crone))
    N = chain.n_states
    cd = np.hstack([chain.D[0], chain.C[0]])  # [D_bar, C_bar]
    A = np.zeros((N + 1, N + 1))
    A[0, 0] = -2 * beta * w_ra
    A[1:, 0] = chain.B[:, 0]
    A[1:, 1:] = chain.A
    A[0, :] -= w_ra**2 * cd
    B = np.zeros((N + 1, 1))
    B[0, 0] = 1.0
    C = w_ra**2 * cd[None, :]
    base = StateSpaceSystem(A, B, C, [[0.0]], ("reset",) + ("crone",) * N)
    return ResetSystem(base, [gamma] + [1.0] * N, 0, "FOSRE", (0,))


def make_fosre_lead(w_r: float, w_l: float, lam: float, w_f: float,
                    crone: CroneConfig, beta: float = 1.0) -> StateSpaceSystem:
    """Lead paired with a FOSRE lag.

    ``D(s) = [F(s)^-1 (s/w_r^2 + 2 beta/w_r) + 1] / ((s/w_f)^2 + 2 s/w_f + 1)``
    where ``F`` is the same CRONE chain used by the lag, so ``F^-1`` swaps
    its zeros and poles.  Realized as ``F^-1`` feeding a two-input section
    over the common ``w_f`` denominator.
    """
    _check_positive(w_r=w_r, w_l=w_l, w_f=w_f, beta=beta)
    if not (np.isclose(crone.lam, lam) and np.isclose(crone.w_l, w_l)):
        raise ValueError("CRONE configuration disagrees with lam / w_l")
    inv = realize_crone(crone_place(crone).inverse(), label="lead")
    N = inv.n_states
    # route [w; e] with w = F^-1 e
    stacked = StateSpaceSystem(inv.A, inv.B, np.vstack([inv.C, np.zeros((1, N))]),
                               np.vstack([inv.D, [[1.0]]]), inv.state_labels)
    # observable form over the monic denominator s^2 + 2 w_f s + w_f^2
    A = [[-2 * w_f, 1.0], [-w_f**2, 0.0]]
    B = [[w_f**2 / w_r**2, 0.0],
         [w_f**2 * 2 * beta / w_r, w_f**2]]
    mixer = StateSpaceSystem(A, B, [[1.0, 0.0]], [[0.0, 0.0]], ("lead", "lead"))
    return series(stacked, mixer)


@dataclass(frozen=True)
class CgLpController:
    """Controller chain: reset lag -> lead -> PI -> tamed derivative.

    ``lag`` is ``None`` for a purely linear (PID-type) controller, in which
    case ``lead`` holds whatever linear filter stands in its place.
    """

    lag: ResetSystem | None
    lead: StateSpaceSystem
    pi: StateSpaceSystem
    tamed_derivative: StateSpaceSystem
    name: str = ""

    def linear_tail(self) -> StateSpaceSystem:
        """Series connection of every block after the reset lag."""
        return series(series(self.lead, self.pi), self.tamed_derivative)

    def base_linear(self) -> StateSpaceSystem:
        """Whole chain with resets disabled."""
        tail = self.linear_tail()
        if self.lag is None:
            return tail
        return series(self.lag.base, tail)

    def with_kp(self, kp: float) -> "CgLpController":
        """Replace the PI gain (the PI block is ``kp (1 + w_i/s)``)."""
        old_kp = float(self.pi.D[0, 0])
        pi = self.pi.scaled(kp / old_kp)
        return CgLpController(self.lag, self.lead, pi, self.tamed_derivative, self.name)

    @property
    def kp(self) -> float:
        return float(self.pi.D[0, 0])

    @property
    def is_reset(self) -> bool:
        return self.lag is not None and len(self.lag.reset_state_indices) > 0
