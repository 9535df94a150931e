"""Time-domain simulation of reset elements and reset control loops.

Reset elements are linear between resets, so for references generated by
a linear exosystem (zero, step, sinusoid) the flow is propagated exactly
with matrix exponentials of the state augmented by the exosystem.  Zero
crossings of the reset trigger are bracketed on the fixed grid and refined
by safeguarded Newton steps on the exact flow; the jump is applied at the refined instant and the flow
resumes from there.  Arbitrary callable inputs fall back to fixed-step RK4
with bisection refinement.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .elements import CgLpController, ResetSystem
from .lti import StateSpaceSystem, matrix_exponential
from .stability import ClosedLoopResetSystem, build_closed_loop

__all__ = [
    "SimConfig",
    "SimulationTrace",
    "TrackingMetrics",
    "Sinusoid",
    "Step",
    "Zero",
    "SimulationDivergedError",
    "NotConvergedError",
    "NotSettledError",
    "simulate_reset",
    "simulate_closed_loop",
    "steady_state_metrics",
    "harmonic_extract",
    "step_metrics",
    "control_peak",
    "default_dt",
]

_DIVERGENCE_NORM = 1e12
_CHUNK = 512


class SimulationDivergedError(RuntimeError):
    """State norm exceeded the divergence bound."""

    def __init__(self, t: float):
        super().__init__(f"state norm exceeded {_DIVERGENCE_NORM:g} at t={t:.6g} s")
        self.t = t


class NotConvergedError(RuntimeError):
    """Per-period error RMS still drifts after the warmup."""


class NotSettledError(RuntimeError):
    """Step response leaves the settling band at the end of the run."""


def default_dt(f_highest: float) -> float:
    """Step size ``1/(200 f)`` for the highest frequency of interest (Hz)."""
    return 1.0 / (200.0 * f_highest)


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step simulation settings (seconds).

    ``reset_refine_tol`` defaults to ``1e-6 dt`` and ``min_inter_reset``
    to ten times that.
    """

    dt: float
    duration: float
    reset_refine_tol: float | None = None
    min_inter_reset: float | None = None
    warmup_periods: int = 10
    measure_periods: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.reset_refine_tol is None:
            object.__setattr__(self, "reset_refine_tol", 1e-6 * self.dt)
        if self.min_inter_reset is None:
            object.__setattr__(self, "min_inter_reset", 10 * self.reset_refine_tol)
        if not 0 < self.reset_refine_tol < self.dt:
            raise ValueError("reset_refine_tol must lie in (0, dt)")
        if self.min_inter_reset < self.reset_refine_tol:
            raise ValueError("min_inter_reset must be at least reset_refine_tol")
        if self.warmup_periods < 0 or self.measure_periods < 1:
            raise ValueError("need warmup_periods >= 0 and measure_periods >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


# ---------------------------------------------------------------- signals

@dataclass(frozen=True)
class Sinusoid:
    """``amplitude * sin(w t + phase)``, ``w`` in rad/s."""

    w: float
    amplitude: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        return self.amplitude * np.sin(self.w * np.asarray(t) + self.phase)

    def exosystem(self):
        S = np.array([[0.0, self.w], [-self.w, 0.0]])
        v0 = self.amplitude * np.array([math.sin(self.phase), math.cos(self.phase)])
        return S, v0, np.array([1.0, 0.0])


@dataclass(frozen=True)
class Step:
    """``amplitude`` for ``t >= 0``."""

    amplitude: float = 1.0

    def __call__(self, t):
        return np.full(np.shape(t), self.amplitude, dtype=float)

    def exosystem(self):
        return np.zeros((1, 1)), np.array([self.amplitude]), np.array([1.0])


@dataclass(frozen=True)
class Zero:
    def __call__(self, t):
        return np.zeros(np.shape(t))

    def exosystem(self):
        return np.zeros((0, 0)), np.zeros(0), np.zeros(0)


# ----------------------------------------------------------------- traces

@dataclass(frozen=True)
class _ExactRecord:
    """Data for exact integrals of the piecewise-exponential flow.

    ``Z`` holds augmented states on the grid (sample ``k`` is the state
    entering interval ``k``); ``events`` lists ``(k, tau)`` for each jump
    at ``t_k + tau``.
    """

    M: np.ndarray
    R: np.ndarray
    rows: np.ndarray
    Z: np.ndarray
    events: tuple


@dataclass
class SimulationTrace:
    """Signals on the uniform grid ``t_k = k dt``.

    ``x`` holds the states (rows are samples) or ``None`` when they were not
    stored.  ``reset_times`` are the refined jump instants;
    ``coalesced_resets`` are crossings skipped by the Zeno guard.
    """

    t: np.ndarray
    r: np.ndarray
    e: np.ndarray
    u: np.ndarray
    y: np.ndarray
    x: np.ndarray | None
    reset_times: list
    coalesced_resets: list = field(default_factory=list)
    state_labels: tuple = ()
    reference: object = None
    exact: _ExactRecord | None = field(default=None, repr=False)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def reset_flags(self) -> np.ndarray:
        """1 at the first grid sample at or after each reset, else 0."""
        flags = np.zeros(self.t.size, dtype=int)
        if self.reset_times:
            idx = np.searchsorted(self.t, np.asarray(self.reset_times) - 1e-15)
            flags[idx[idx < self.t.size]] = 1
        return flags

    def to_csv(self, fh=None, decimate: int = 1) -> str:
        """Columns ``t, r, e, u, y, x1..xn, reset_flag``."""
        out = io.StringIO() if fh is None else fh
        writer = csv.writer(out, lineterminator="\n")
        nx = 0 if self.x is None else self.x.shape[1]
        writer.writerow(["t", "r", "e", "u", "y"] + [f"x{i + 1}" for i in range(nx)]
                        + ["reset_flag"])
        flags = self.reset_flags()
        if decimate > 1:
            # keep flags from dropped samples
            flags = np.maximum.reduceat(flags, np.arange(0, flags.size, decimate))
        for j, k in enumerate(range(0, self.t.size, decimate)):
            row = [self.t[k], self.r[k], self.e[k], self.u[k], self.y[k]]
            if nx:
                row += list(self.x[k])
            writer.writerow([f"{v:.12g}" for v in row] + [int(flags[j])])
        return out.getvalue() if fh is None else ""


@dataclass(frozen=True)
class TrackingMetrics:
    """Error and step-response figures.

    ``iae`` is the time-normalized integral ``(1/T) int |e| dt`` over the
    measurement window ``T``; ``iae_raw`` is the integral itself.
    """

    rms: float = float("nan")
    iae: float = float("nan")
    iae_raw: float = float("nan")
    overshoot: float = float("nan")
    settling_time: float = float("nan")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("rms", "iae", "iae_raw", "overshoot", "settling_time")}


# ------------------------------------------------------------------- core

@dataclass(frozen=True)
class _Plant:
    """Internal description: ``x' = A x + B r``, ``sig = C_sig x + D_sig r``."""

    A: np.ndarray
    B: np.ndarray
    C_e: np.ndarray
    D_e: float
    C_u: np.ndarray
    D_u: float
    C_y: np.ndarray
    D_y: float
    reset_diag: np.ndarray
    labels: tuple


def _refine_crossing(M, ce, za, zb, dt, tol):
    """Instant in ``[0, dt]`` where ``ce . e^{M tau} za`` vanishes.

    Starts from the root of the cubic Hermite interpolant of the trigger
    (values and slopes at both ends are exact) and polishes it with Newton
    steps on the exact flow, falling back to bisection of the bracket.
    Returns ``(tau, state at tau)``.
    """
    ea, eb = ce @ za, ce @ zb
    if ea == 0:
        return 0.0, za.copy()
    if np.sign(ea) == np.sign(eb):
        # sign flip lost to rounding between chunked and direct flow;
        # the trigger is at round-off level, take the nearer end
        return (0.0, za.copy()) if abs(ea) <= abs(eb) else (dt, zb.copy())
    da, db = ce @ (M @ za) * dt, ce @ (M @ zb) * dt
    # Hermite cubic in u = tau/dt
    coeffs = [2 * ea - 2 * eb + da + db, -3 * ea + 3 * eb - 2 * da - db, da, ea]
    roots = np.roots(coeffs) if np.any(coeffs[:3]) else np.array([])
    lin = ea / (ea - eb)
    real = [r.real for r in roots if abs(r.imag) < 1e-9 and 0.0 <= r.real <= 1.0]
    u = min(real, key=lambda r: abs(r - lin)) if real else lin
    lo, hi = 0.0, dt
    sa = np.sign(ea)
    tau = u * dt
    for _ in range(60):
        zt = matrix_exponential(M, tau) @ za
        ft = ce @ zt
        if ft == 0:
            return tau, zt
        if np.sign(ft) == sa:
            lo = tau
        else:
            hi = tau
        slope = ce @ (M @ zt)
        step = ft / slope if slope != 0 else np.inf
        nxt = tau - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - tau) < tol or hi - lo < tol:
            tau = nxt
            break
        tau = nxt
    return tau, matrix_exponential(M, tau) @ za


def _exact(sysd: _Plant, ref, cfg: SimConfig, x0, store_states: bool) -> SimulationTrace:
    S, v0, h = ref.exosystem()
    n, m = sysd.A.shape[0], S.shape[0]
    N = n + m
    M = np.zeros((N, N))
    M[:n, :n] = sysd.A
    M[:n, n:] = sysd.B @ h[None, :]
    M[n:, n:] = S
    # output rows over z = [x; v]
    rows = np.zeros((4, N))
    rows[0, n:] = h
    for i, (C, D) in enumerate(((sysd.C_e, sysd.D_e), (sysd.C_u, sysd.D_u),
                                (sysd.C_y, sysd.D_y)), start=1):
        rows[i, :n] = C[0]
        rows[i, n:] = D * h
    ce = rows[1]
    R = np.concatenate([sysd.reset_diag, np.ones(m)])
    any_reset = bool(np.any(sysd.reset_diag != 1.0))

    dt = cfg.dt
    K = cfg.n_steps
    Phi = matrix_exponential(M, dt)
    # powers Phi^1..Phi^C for chunked propagation
    C = min(_CHUNK, max(K, 1))
    powers = np.empty((C, N, N))
    powers[0] = Phi
    for k in range(1, C):
        powers[k] = Phi @ powers[k - 1]

    # full augmented states only when requested; signals always
    Z = np.empty((K + 1, N)) if store_states else None
    sig = np.empty((K + 1, 4))

    def keep(i, zs):
        sig[i] = zs @ rows.T
        if store_states:
            Z[i] = zs

    z = np.concatenate([np.asarray(x0, dtype=float), v0])
    keep(0, z)
    resets, skipped, events = [], [], []
    last_reset = -math.inf
    sign = np.sign(ce @ z)

    def flow(zs, tau):
        return matrix_exponential(M, tau) @ zs

    k = 0
    while k < K:
        c = min(C, K - k)
        block = powers[:c] @ z
        if not np.all(np.isfinite(block)) or np.max(np.abs(block)) > _DIVERGENCE_NORM:
            bad = np.flatnonzero(~np.isfinite(block).all(axis=1) |
                                 (np.abs(block).max(axis=1) > _DIVERGENCE_NORM))
            raise SimulationDivergedError((k + 1 + int(bad[0])) * dt)
        hit = -1
        if any_reset:
            ev = np.sign(block @ ce)
            # compare each nonzero sign with the previous nonzero one, so an
            # exact zero sample does not hide a crossing
            nz = np.flatnonzero(ev)
            seq = ev[nz]
            prev = np.concatenate([[sign if sign != 0 else (seq[0] if seq.size else 0)],
                                   seq[:-1]])
            changes = nz[np.flatnonzero(seq != prev)]
            if changes.size:
                hit = int(changes[0])
        if hit < 0:
            keep(slice(k + 1, k + 1 + c), block)
            z = block[-1]
            s_end = np.sign(ce @ z)
            if s_end != 0:
                sign = s_end
            k += c
            continue
        # accept samples before the crossing interval
        keep(slice(k + 1, k + 1 + hit), block[:hit])
        za = block[hit - 1] if hit > 0 else z
        ta = (k + hit) * dt
        ea = ce @ za

        tau, zc = _refine_crossing(M, ce, za, block[hit], dt, cfg.reset_refine_tol)
        tc = ta + tau
        if tc - last_reset >= cfg.min_inter_reset:
            zc = R * zc
            resets.append(tc)
            events.append((k + hit, tau))
            last_reset = tc
        else:
            skipped.append(tc)
        z = flow(zc, dt - tau)
        keep(k + hit + 1, z)
        s_end = np.sign(ce @ z)
        sign = s_end if s_end != 0 else -sign
        k += hit + 1

    t = np.arange(K + 1) * dt
    record = _ExactRecord(M, R, rows, Z, tuple(events)) if store_states else None
    return SimulationTrace(t, sig[:, 0], sig[:, 1], sig[:, 2], sig[:, 3],
                           Z[:, :n].copy() if store_states else None,
                           resets, skipped, sysd.labels, ref, record)


def _rk4(sysd: _Plant, ref: Callable, cfg: SimConfig, x0, store_states: bool) -> SimulationTrace:
    A, B = sysd.A, sysd.B[:, 0]
    dt, K = cfg.dt, cfg.n_steps
    n = A.shape[0]

    def f(t, x):
        return A @ x + B * float(ref(t))

    def step(t, x, h):
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t + h, x + h * k3)
        return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def err(t, x):
        return float(sysd.C_e[0] @ x + sysd.D_e * float(ref(t)))

    X = np.empty((K + 1, n))
    x = np.asarray(x0, dtype=float).copy()
    X[0] = x
    any_reset = bool(np.any(sysd.reset_diag != 1.0))
    resets, skipped = [], []
    last_reset = -math.inf
    sign = np.sign(err(0.0, x))
    for k in range(K):
        t = k * dt
        xn = step(t, x, dt)
        if not np.all(np.isfinite(xn)) or np.max(np.abs(xn), initial=0.0) > _DIVERGENCE_NORM:
            raise SimulationDivergedError(t + dt)
        s = np.sign(err(t + dt, xn))
        if any_reset and s != 0 and sign != 0 and s != sign:
            lo, hi = 0.0, dt
            while hi - lo > cfg.reset_refine_tol:
                mid = 0.5 * (lo + hi)
                if np.sign(err(t + mid, step(t, x, mid))) == sign:
                    lo = mid
                else:
                    hi = mid
            tau = hi
            xc = step(t, x, tau)
            tc = t + tau
            if tc - last_reset >= cfg.min_inter_reset:
                xc = sysd.reset_diag * xc
                resets.append(tc)
                last_reset = tc
            else:
                skipped.append(tc)
            xn = step(tc, xc, dt - tau)
            s2 = np.sign(err(t + dt, xn))
            s = s2 if s2 != 0 else s
        if s != 0:
            sign = s
        X[k + 1] = xn
        x = xn
    t = np.arange(K + 1) * dt
    r = np.array([float(ref(tt)) for tt in t])
    e = X @ sysd.C_e[0] + sysd.D_e * r
    u = X @ sysd.C_u[0] + sysd.D_u * r
    y = X @ sysd.C_y[0] + sysd.D_y * r
    return SimulationTrace(t, r, e, u, y, X if store_states else None,
                           resets, skipped, sysd.labels, ref)


def _run(sysd: _Plant, reference, cfg: SimConfig, x0, store_states: bool, method: str):
    n = sysd.A.shape[0]
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"initial state must have length {n}")
    exact = hasattr(reference, "exosystem")
    if method == "rk4" or (method == "auto" and not exact):
        return _rk4(sysd, reference, cfg, x0, store_states)
    if method not in ("auto", "exact"):
        raise ValueError("method must be 'auto', 'exact' or 'rk4'")
    if not exact:
        raise ValueError("exact propagation needs a Zero, Step or Sinusoid input")
    return _exact(sysd, reference, cfg, x0, store_states)


def simulate_reset(rs: ResetSystem, input, cfg: SimConfig, x0=None,
                   store_states: bool = True, method: str = "auto") -> SimulationTrace:
    """Open-loop response of a reset element.

    The element input is recorded as both ``r`` and ``e``; its output as
    both ``u`` and ``y``.  Resets trigger on sign changes of the input.

    Parameters
    ----------
    input : Sinusoid, Step, Zero or callable
        Exosystem signals are propagated exactly; a plain callable uses RK4.
    method : {"auto", "exact", "rk4"}
    """
    b = rs.base
    n = b.n_states
    zero = np.zeros((1, n))
    sysd = _Plant(np.array(b.A), np.array(b.B), zero, 1.0, np.array(b.C), float(b.D[0, 0]),
                  np.array(b.C), float(b.D[0, 0]), np.array(rs.reset_diag),
                  b.state_labels)
    return _run(sysd, input, cfg, x0, store_states, method)


def _closed_loop_plant(cl: ClosedLoopResetSystem) -> _Plant:
    return _Plant(cl.A_cl, cl.B_r, cl.C_e, cl.D_e, cl.C_u, cl.D_u, cl.C_y, cl.D_y,
                  cl.reset_diag, cl.state_labels)


def simulate_closed_loop(ctrl: CgLpController, plant: StateSpaceSystem, reference,
                         cfg: SimConfig, x0=None, store_states: bool = True,
                         method: str = "auto") -> SimulationTrace:
    """Unity-feedback loop ``e = r - y`` with the reset lag keyed to ``e``.

    States follow the ordering of :func:`build_closed_loop`
    (plant, non-resetting controller, resetting controller).
    """
    cl = build_closed_loop(plant, ctrl)
    return _run(_closed_loop_plant(cl), reference, cfg, x0, store_states, method)


# ---------------------------------------------------------------- metrics

def _window(trace: SimulationTrace, w: float, n_periods: int, start_periods: int | None = None):
    """Index slice covering ``n_periods`` whole periods, ending at the trace
    end (or starting after ``start_periods`` periods)."""
    T = 2 * math.pi / w
    dt = trace.dt
    spp = T / dt
    if abs(spp - round(spp)) > 1e-6 * spp:
        raise ValueError(f"period {T:g} s is not an integer number of {dt:g} s steps")
    spp = int(round(spp))
    total = n_periods * spp
    if start_periods is None:
        end = trace.t.size - 1
        start = end - total
    else:
        start = start_periods * spp
        end = start + total
    if start < 0 or end > trace.t.size - 1:
        raise ValueError("trace too short for the requested window")
    return start, end, spp


def steady_state_metrics(trace: SimulationTrace, ref_freq: float, cfg: SimConfig,
                         drift_tol: float = 0.01) -> TrackingMetrics:
    """RMS and IAE of ``e`` over ``measure_periods`` periods after the warmup.

    Raises
    ------
    NotConvergedError
        If per-period RMS varies by more than ``drift_tol`` (relative).
    """
    start, end, spp = _window(trace, ref_freq, cfg.measure_periods, cfg.warmup_periods)
    e = trace.e[start:end]
    per = np.sqrt(np.mean(e.reshape(cfg.measure_periods, spp) ** 2, axis=1))
    scale = per.max()
    if scale > 0 and (per.max() - per.min()) > drift_tol * scale:
        raise NotConvergedError(
            f"per-period RMS drifts by {(per.max() - per.min()) / scale:.2%}")
    window = e.size * trace.dt
    iae_raw = float(np.sum(np.abs(e)) * trace.dt)
    return TrackingMetrics(rms=float(np.sqrt(np.mean(e**2))),
                           iae=iae_raw / window, iae_raw=iae_raw)


_SIGNALS = {"r": 0, "e": 1, "u": 2, "y": 3}


def _phi_integral(M: np.ndarray, s: complex, h: float) -> np.ndarray:
    """``int_0^h e^{(M - s I) tau} d tau`` via an augmented exponential."""
    N = M.shape[0]
    big = np.zeros((2 * N, 2 * N), dtype=complex)
    big[:N, :N] = M - s * np.eye(N)
    big[:N, N:] = np.eye(N)
    return scipy.linalg.expm(big * h)[:N, N:]


def _fourier_exact(rec: _ExactRecord, dt: float, start: int, end: int,
                   row: np.ndarray, w: float) -> complex:
    """Exact ``int y(t) e^{-j w t} dt`` over grid intervals ``[start, end)``."""
    s = 1j * w
    W = _phi_integral(rec.M, s, dt)
    k = np.arange(start, end)
    phase = np.exp(-s * k * dt)
    total = row @ W @ (phase @ rec.Z[start:end])
    for kk, tau in rec.events:
        if not start <= kk < end:
            continue
        z = rec.Z[kk]
        # replace the jump-free estimate of this interval with the split one
        total -= np.exp(-s * kk * dt) * (row @ W @ z)
        zc = rec.R * (matrix_exponential(rec.M, tau) @ z)
        part = _phi_integral(rec.M, s, tau) @ z + \
            np.exp(-s * tau) * (_phi_integral(rec.M, s, dt - tau) @ zc)
        total += np.exp(-s * kk * dt) * (row @ part)
    return complex(total)


def harmonic_extract(trace: SimulationTrace, base_freq: float, n: int = 1,
                     n_periods: int | None = None, signal: str = "y") -> complex:
    """Complex gain of the ``n``-th output harmonic over trailing whole periods.

    The projection ``(2j/T) int y e^{-j n w t} dt`` is divided by the input's
    fundamental so that input amplitude and phase cancel (reset elements are
    homogeneous): a unit ``sin(w t)`` input yields ``G_n`` directly.  Traces
    from exact propagation with stored states are integrated exactly between
    samples, which captures transients shorter than ``dt``; otherwise the
    samples are averaged.

    Raises
    ------
    ValueError
        If a period is not an integer number of samples or the trace is too
        short.
    """
    if n_periods is None:
        T = 2 * math.pi / base_freq
        n_periods = int((trace.t[-1] - trace.t[0]) // T) // 2 or 1
    start, end, _ = _window(trace, base_freq, n_periods)
    span = (end - start) * trace.dt
    rec = trace.exact
    if rec is not None:
        dt = trace.dt
        yn = 2j / span * _fourier_exact(rec, dt, start, end, rec.rows[_SIGNALS[signal]],
                                        n * base_freq)
        r1 = 2j / span * _fourier_exact(rec, dt, start, end, rec.rows[0], base_freq)
    else:
        t = trace.t[start:end]
        y = getattr(trace, signal)[start:end]
        r = trace.r[start:end]
        yn = 2j * np.mean(y * np.exp(-1j * n * base_freq * t))
        r1 = 2j * np.mean(r * np.exp(-1j * base_freq * t))
    if abs(r1) == 0:
        raise ValueError("input has no component at the base frequency")
    unit = r1 / abs(r1)
    return complex(yn / unit**n / abs(r1))


def step_metrics(trace: SimulationTrace, final: float | None = None,
                 band: float = 0.02) -> TrackingMetrics:
    """Overshoot and 2% settling time of ``y``.

    ``final`` defaults to the last reference sample.
    """
    final = float(trace.r[-1]) if final is None else float(final)
    if final == 0:
        raise ValueError("step metrics need a nonzero final value")
    y = trace.y
    overshoot = max(0.0, float((np.max(y) - final) / final)) if final > 0 else \
        max(0.0, float((np.min(y) - final) / final))
    outside = np.flatnonzero(np.abs(y - final) > band * abs(final))
    if outside.size and outside[-1] == y.size - 1:
        raise NotSettledError("response is outside the settling band at the end")
    settling = 0.0 if outside.size == 0 else float(trace.t[outside[-1] + 1])
    return TrackingMetrics(overshoot=overshoot, settling_time=settling)


def control_peak(trace: SimulationTrace, t_start: float = 0.0) -> float:
    """``max |u|`` for ``t >= t_start``."""
    mask = trace.t >= t_start
    if not np.any(mask):
        raise ValueError("t_start lies beyond the trace")
    return float(np.max(np.abs(trace.u[mask])))
