"""Stability checks for reset systems.

``lemma1_check`` tests the open-loop periodic-solution condition
``|eig(A_rho e^{A d})| < 1`` for all ``d > 0``.  ``verify_hbeta`` and
``search_hbeta`` handle the H_beta quadratic-stability certificate of the
closed loop: ``P > 0``, ``A_cl' P + P A_cl < 0``, ``B0' P = C0`` with
``C0 = [beta C_p, 0, P_rho]``, and ``A_rho' P_rho A_rho - P_rho <= 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .elements import CgLpController, ResetSystem
from .lti import StateSpaceSystem, is_hurwitz, matrix_exponential

__all__ = [
    "AlgebraicLoopError",
    "ClosedLoopResetSystem",
    "HbetaCertificate",
    "Lemma1Result",
    "HbetaReport",
    "build_closed_loop",
    "lemma1_check",
    "lemma1_gamma_boundary",
    "verify_hbeta",
    "search_hbeta",
    "hbeta_spr_margin",
]


class AlgebraicLoopError(ValueError):
    """Raised when controller and plant both have direct feedthrough."""


@dataclass(frozen=True)
class ClosedLoopResetSystem:
    """Unity-feedback loop of a reset controller chain and a plant.

    States are ordered ``[plant (n_p); non-resetting controller (n_nr);
    resetting controller (n_r)]``.  Signals are affine in the state and the
    reference: ``e = C_e x + D_e r`` and likewise for ``u`` and ``y``.
    """

    A_cl: np.ndarray
    B_r: np.ndarray
    C_e: np.ndarray
    D_e: float
    C_u: np.ndarray
    D_u: float
    C_y: np.ndarray
    D_y: float
    reset_diag: np.ndarray
    C_p: np.ndarray
    n_p: int
    n_nr: int
    n_r: int
    state_labels: tuple = field(default=())

    @property
    def n_states(self) -> int:
        return self.A_cl.shape[0]

    @property
    def A_rho(self) -> np.ndarray:
        return np.diag(self.reset_diag)

    @property
    def P_rho_block(self) -> np.ndarray:
        """Reset coefficients of the resetting block."""
        return np.diag(self.reset_diag[self.n_p + self.n_nr:])


def build_closed_loop(plant: StateSpaceSystem, ctrl: CgLpController) -> ClosedLoopResetSystem:
    """Close ``e = r - y`` around ``ctrl`` followed by ``plant``.

    Raises
    ------
    AlgebraicLoopError
        If both the chain and the plant have nonzero feedthrough.
    """
    K = ctrl.base_linear()
    G = plant
    dk = float(K.D[0, 0])
    dg = float(G.D[0, 0])
    if dk != 0.0 and dg != 0.0:
        raise AlgebraicLoopError("controller and plant both have direct feedthrough")
    ng, nk = G.n_states, K.n_states
    n = ng + nk
    # signals as rows over [x_g; x_k] plus reference coefficient
    if dk == 0.0:
        u_x = np.hstack([np.zeros((1, ng)), K.C])
        u_r = 0.0
        y_x = np.hstack([G.C, np.zeros((1, nk))]) + dg * u_x
        y_r = 0.0
        e_x = -y_x
        e_r = 1.0
    else:
        y_x = np.hstack([G.C, np.zeros((1, nk))])
        y_r = 0.0
        e_x = -y_x
        e_r = 1.0
        u_x = np.hstack([np.zeros((1, ng)), K.C]) + dk * e_x
        u_r = dk
    A = np.zeros((n, n))
    A[:ng, :ng] = G.A
    A[:ng, :] += G.B @ u_x
    A[ng:, ng:] = K.A
    A[ng:, :] += K.B @ e_x
    B_r = np.vstack([G.B * u_r, K.B * e_r])

    # reset flags inside the chain: the lag occupies the first states of K
    diag_k = np.ones(nk)
    resettable = np.zeros(nk, dtype=bool)
    if ctrl.lag is not None:
        diag_k[:ctrl.lag.n_states] = ctrl.lag.reset_diag
        # designated reset states stay in the reset block even at gamma = 1
        resettable[list(ctrl.lag.resettable)] = True
    order_k = np.concatenate([np.flatnonzero(~resettable), np.flatnonzero(resettable)])
    perm = np.concatenate([np.arange(ng), ng + order_k])
    A = A[np.ix_(perm, perm)]
    B_r = B_r[perm]
    diag = np.concatenate([np.ones(ng), diag_k[order_k]])
    labels = tuple(("plant",) * ng) + tuple(K.state_labels[i] for i in order_k)
    return ClosedLoopResetSystem(
        A_cl=A, B_r=B_r,
        C_e=e_x[:, perm], D_e=e_r,
        C_u=u_x[:, perm], D_u=u_r,
        C_y=y_x[:, perm], D_y=y_r,
        reset_diag=diag, C_p=np.array(G.C, dtype=float),
        n_p=ng, n_nr=int(np.sum(~resettable)), n_r=int(np.sum(resettable)),
        state_labels=labels)


@dataclass(frozen=True)
class Lemma1Result:
    holds: bool
    margin: float
    worst_delta: float
    worst_radius: float
    limit_radius: float = float("nan")
    marginal: bool = False


def lemma1_check(rs, delta_max: float = 1e2, grid_points: int = 1000,
                 delta_min: float = 1e-4, tol: float = 1e-12) -> Lemma1Result:
    """Open-loop convergence test ``rho(A_rho e^{A d}) < 1`` for all ``d > 0``.

    The radius is sampled on ``grid_points`` log-spaced ``d`` in
    ``[delta_min, delta_max]``; the ``d -> 0`` limit ``rho(A_rho)`` is
    checked separately.  A limit of exactly one (identity reset, or any
    element where some states never reset) is not attained for ``d > 0``
    and is admitted with the non-strict allowance ``1 + tol``; such results
    are flagged ``marginal``.

    Parameters
    ----------
    rs : ResetSystem, ClosedLoopResetSystem or (A, A_rho) pair
        The pair form admits reset coefficients outside ``[-1, 1]``.

    Returns
    -------
    Lemma1Result
        ``margin = 1 - max`` radius over the grid and, unless marginal, the
        limit (reported at ``worst_delta = 0``).
    """
    if isinstance(rs, ResetSystem):
        A, A_rho = rs.base.A, rs.A_rho
    elif isinstance(rs, tuple):
        A, A_rho = (np.atleast_2d(np.asarray(m, dtype=float)) for m in rs)
    else:
        A, A_rho = rs.A_cl, rs.A_rho
    deltas = np.logspace(math.log10(delta_min), math.log10(delta_max), grid_points)
    radii = np.array([np.max(np.abs(np.linalg.eigvals(A_rho @ matrix_exponential(A, d))))
                      for d in deltas])
    k = int(np.argmax(radii))
    worst, worst_d = float(radii[k]), float(deltas[k])
    rho0 = float(np.max(np.abs(np.linalg.eigvals(A_rho))))
    holds = worst < 1.0 and rho0 <= 1.0 + tol
    marginal = rho0 >= 1.0 - tol
    if not marginal and rho0 >= worst:
        worst, worst_d = rho0, 0.0
    return Lemma1Result(holds, 1.0 - worst, worst_d, worst, rho0, marginal)


def lemma1_gamma_boundary(build, lo: float = 0.0, hi: float = 2.0,
                          tol: float = 1e-9, **kw) -> float:
    """Smallest ``|gamma|`` at which :func:`lemma1_check` stops holding.

    ``build(gamma)`` returns the reset element or an ``(A, A_rho)`` pair;
    ``lo`` must satisfy the condition and ``hi`` violate it.  Bisection to
    width ``tol``.
    """
    if not lemma1_check(build(lo), **kw).holds:
        raise ValueError("condition fails at the lower end")
    if lemma1_check(build(hi), **kw).holds:
        raise ValueError("condition holds at the upper end")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if lemma1_check(build(mid), **kw).holds:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class HbetaCertificate:
    """``beta`` (n_r), symmetric ``P`` and positive-definite ``P_rho``."""

    beta: np.ndarray
    P: np.ndarray
    P_rho: np.ndarray


@dataclass
class HbetaReport:
    ok: bool
    margins: dict
    violations: list

    def as_dict(self) -> dict:
        return {"ok": self.ok, "margins": self.margins, "violations": self.violations}


def _jacobi_scaled_eigs(M: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``S M S`` with ``S = diag(|M_ii|^-1/2)``.

    Congruence keeps the inertia of ``M`` while removing the enormous scale
    spread between plant and high-frequency filter states.
    """
    d = np.sqrt(np.abs(np.diag(M)))
    d[d == 0] = 1.0
    S = 1.0 / d
    return np.linalg.eigvalsh((M * S[:, None]) * S[None, :])


def _c0(cl: ClosedLoopResetSystem, beta, P_rho) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=float)).reshape(cl.n_r, 1)
    return np.hstack([beta @ cl.C_p, np.zeros((cl.n_r, cl.n_nr)),
                      np.atleast_2d(P_rho)])


def verify_hbeta(cl: ClosedLoopResetSystem, cert: HbetaCertificate,
                 tol: float = 1e-8) -> HbetaReport:
    """Check the four H_beta conditions for a candidate certificate.

    Definiteness tests use Jacobi-scaled eigenvalues against ``tol``; the
    equality ``B0' P = C0`` is checked in max-norm relative to ``max|P|``.
    """
    n = cl.n_states
    P = np.asarray(cert.P, dtype=float)
    P_rho = np.atleast_2d(np.asarray(cert.P_rho, dtype=float))
    if P.shape != (n, n):
        raise ValueError(f"P must be {n}x{n}")
    if P_rho.shape != (cl.n_r, cl.n_r):
        raise ValueError(f"P_rho must be {cl.n_r}x{cl.n_r}")
    violations = []
    margins = {}

    asym = float(np.max(np.abs(P - P.T))) / max(1.0, float(np.max(np.abs(P))))
    if asym > tol:
        violations.append("(i) P is not symmetric")
        margins["i_min_eig"] = float("nan")
    else:
        Ps = 0.5 * (P + P.T)
        margins["i_min_eig"] = float(_jacobi_scaled_eigs(Ps).min())
        if margins["i_min_eig"] <= tol:
            violations.append("(i) P is not positive definite")
    Ps = 0.5 * (P + P.T)
    L = cl.A_cl.T @ Ps + Ps @ cl.A_cl
    margins["ii_max_eig"] = float(_jacobi_scaled_eigs(0.5 * (L + L.T)).max())
    if margins["ii_max_eig"] >= -tol:
        violations.append("(ii) A_cl' P + P A_cl is not negative definite")
    if cl.n_r > 0:
        C0 = _c0(cl, cert.beta, P_rho)
        B0tP = Ps[n - cl.n_r:, :]
        err = float(np.max(np.abs(B0tP - C0))) / max(1.0, float(np.max(np.abs(Ps))))
        margins["iii_residual"] = err
        if err > tol:
            violations.append("(iii) B0' P != C0")
        Ar = cl.P_rho_block
        M = Ar.T @ P_rho @ Ar - P_rho
        margins["iv_max_eig"] = float(np.linalg.eigvalsh(0.5 * (M + M.T)).max())
        if margins["iv_max_eig"] > tol * max(1.0, float(np.max(np.abs(P_rho)))):
            violations.append("(iv) A_rho' P_rho A_rho - P_rho is not negative semidefinite")
        pr = np.linalg.eigvalsh(0.5 * (P_rho + P_rho.T)).min()
        margins["P_rho_min_eig"] = float(pr)
        if pr <= 0:
            violations.append("P_rho is not positive definite")
    return HbetaReport(not violations, margins, violations)


def _spr_function(cl, beta: float, p_rho: float = 1.0):
    """``H(s) = C0 (sI - A_cl)^-1 B0`` for a single resetting state."""
    n = cl.n_states
    B0 = np.zeros((n, 1))
    B0[-1, 0] = 1.0
    C0 = _c0(cl, [beta], [[p_rho]])
    return C0, B0


def hbeta_spr_margin(cl: ClosedLoopResetSystem, beta: float, w_grid=None) -> float:
    """Worst normalized real part of ``H_beta(jw)`` over a frequency grid.

    Positive values mean ``H_beta`` is strictly positive real on the grid,
    which (by the KYP lemma) is what a certificate with this ``beta``
    requires.  Each sample is divided by ``|H|`` so very different gain
    regions weigh alike.
    """
    C0, B0 = _spr_function(cl, beta)
    A = cl.A_cl
    if w_grid is None:
        w_grid = np.logspace(-3, 8, 600)
    n = A.shape[0]
    I = np.eye(n)
    worst = np.inf
    for w in w_grid:
        h = (C0 @ np.linalg.solve(1j * w * I - A, B0.astype(complex)))[0, 0]
        worst = min(worst, h.real / max(abs(h), 1e-300))
    return float(worst)


def _balance(A: np.ndarray):
    """Diagonal similarity ``T`` so ``T^-1 A T`` is balanced."""
    _, (scale, _) = scipy.linalg.matrix_balance(A, permute=False, separate=True)
    return scale


def _solve_p(cl: ClosedLoopResetSystem, beta: float | None, p_rho: float | None):
    """Find ``P`` for fixed ``beta / P_rho``, last row pinned to ``C0``.

    Works in balanced coordinates ``z = T^-1 x`` (``T`` diagonal).  The
    semidefinite program maximizes ``s`` subject to ``P >= s I``,
    ``A' P + P A <= -s I`` with both diagonals bounded by one, so ``s``
    lower-bounds the Jacobi-scaled margins that :func:`verify_hbeta`
    measures (those are invariant under diagonal congruence).  The pinned
    row is scaled by a free factor, since the conditions are homogeneous in
    ``(P, beta, P_rho)``.  Without resetting states the whole ``P`` is free.
    Returns ``(P, beta, P_rho, s)`` in original coordinates or ``None``.
    """
    import cvxpy as cp

    n = cl.n_states
    t = _balance(cl.A_cl)
    At = (cl.A_cl * t[None, :]) / t[:, None]
    s = cp.Variable()
    cons = []
    if cl.n_r == 0:
        X = cp.Variable((n, n), symmetric=True)
        Pt = X
    else:
        # last row of P in original coords, mapped: P~ = T P T
        row = _c0(cl, [beta], [[p_rho]])[0]
        row_t = row * t * t[-1]
        row_t = row_t / np.max(np.abs(row_t))
        c = cp.Variable(nonneg=True)
        m = n - 1
        X = cp.Variable((m, m), symmetric=True)
        col = cp.reshape(c * row_t[:m], (m, 1), order="F")
        Pt = cp.bmat([[X, col], [col.T, cp.reshape(c * row_t[-1], (1, 1), order="F")]])
    L = At.T @ Pt + Pt @ At
    cons += [Pt >> s * np.eye(n), L << -s * np.eye(n), cp.diag(Pt) <= 1, cp.diag(L) >= -1]
    prob = cp.Problem(cp.Maximize(s), cons)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.error.SolverError:
            return None
    if Pt.value is None or s.value is None:
        return None
    Pt_val = np.asarray(Pt.value)
    Pt_val = 0.5 * (Pt_val + Pt_val.T)
    P = Pt_val / t[:, None] / t[None, :]
    if cl.n_r == 0:
        return P, np.zeros(0), np.zeros((0, 0)), float(s.value)
    # rescale so the pinned row matches C0 exactly
    k = float(c.value) * np.max(np.abs(row * t * t[-1])) ** -1
    P[-1, :] = k * row
    P[:, -1] = k * row
    return P, np.array([k * beta]), np.array([[k * p_rho]]), float(s.value)


def search_hbeta(cl: ClosedLoopResetSystem, seed: int = 0, max_iters: int = 60,
                 tol: float = 1e-8) -> HbetaCertificate | None:
    """Best-effort search for an H_beta certificate.

    The conditions are homogeneous in ``(P, beta, P_rho)``, so only the
    ratio ``beta / P_rho`` is searched.  It is chosen by a derivative-free search on
    the strict-positive-realness margin of ``H_beta(s)``, starting from a
    seeded restart grid; ``P`` is then computed on the affine set fixed by
    ``B0' P = C0``.  Returns ``None`` when nothing verifiable is found, which
    does not prove infeasibility.
    """
    if not is_hurwitz(cl.A_cl):
        return None
    n = cl.n_states
    if cl.n_r == 0:
        # plain Lyapunov in balanced coordinates with diagonal weights
        # growing with the local time scale; the SDP is a last resort
        t = _balance(cl.A_cl)
        At = (cl.A_cl * t[None, :]) / t[:, None]
        d = np.abs(np.diag(At)) + 1.0
        for p in (1.0, 0.5, 0.0):
            Pt = scipy.linalg.solve_continuous_lyapunov(At.T, -np.diag(d**p))
            P = Pt / t[:, None] / t[None, :]
            cert = HbetaCertificate(np.zeros(0), 0.5 * (P + P.T), np.zeros((0, 0)))
            if verify_hbeta(cl, cert, tol).ok:
                return cert
        sol = _solve_p(cl, None, None)
        if sol is None:
            return None
        cert = HbetaCertificate(sol[1], sol[0], sol[2])
        return cert if verify_hbeta(cl, cert, tol).ok else None
    if cl.n_r != 1:
        raise NotImplementedError("certificate search supports one resetting state")
    rng = np.random.default_rng(seed)
    cp_norm = float(np.max(np.abs(cl.C_p))) or 1.0
    # restart grid: zero, both signs over many decades, seeded extras;
    # beta is searched in asinh coordinates to span scales smoothly
    decades = 10.0 ** np.arange(-6, 3)
    starts = np.concatenate([[0.0], decades, -decades,
                             rng.choice([-1, 1], 6) * 10.0 ** rng.uniform(-6, 2, 6)]) / cp_norm
    scale = 1e-6 / cp_norm

    def neg_margin(u):
        return -hbeta_spr_margin(cl, scale * math.sinh(float(np.ravel(u)[0])))

    scored = sorted((neg_margin(math.asinh(b0 / scale)), i, b0) for i, b0 in enumerate(starts))
    candidates = []
    for f0, i, b0 in scored[:3]:
        res = minimize(neg_margin, [math.asinh(b0 / scale)], method="Nelder-Mead",
                       options={"maxiter": max_iters, "xatol": 1e-6, "fatol": 1e-10})
        if res.fun < f0:
            candidates.append((float(res.fun), i, scale * math.sinh(float(res.x[0]))))
        else:
            candidates.append((f0, i, b0))
    for _, i, b in sorted(candidates):
        sol = _solve_p(cl, b, 1.0)
        if sol is None or not sol[2][0, 0] > 0:
            continue
        cert = HbetaCertificate(sol[1], sol[0], sol[2])
        if verify_hbeta(cl, cert, tol).ok:
            return cert
    return None
