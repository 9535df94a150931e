"""Command-line front end.

Subcommands: ``crone``, ``hosidf``, ``simulate``, ``stability``, ``tune``
and ``repro``.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 acceptance mismatch (``repro`` only).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .config import ConfigError, ControllerConfig, crone_settings, load_config, plant
from .crone import CroneConfig, approximation_error, crone_place, fractional_response
from .hosidf import hosidf_sweep
from .lti import PoleOnAxisError
from .repro import STUDY_RESET_GUARD, _clean, cmd_repro, resolve_controller, study_config
from .simulate import (NotConvergedError, NotSettledError, SimConfig,
                       SimulationDivergedError, Sinusoid, Step, Zero, simulate_closed_loop,
                       steady_state_metrics, step_metrics)
from .stability import build_closed_loop, lemma1_check, search_hbeta, verify_hbeta
from .tuning import TuneSpec, pick_gamma, tune_fosre

__all__ = ["main", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERIC", "EXIT_MISMATCH"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 2, 3, 4
TWO_PI = 2 * math.pi
DEFAULT_SEED = 0

_NUMERIC_ERRORS = (ArithmeticError, np.linalg.LinAlgError, PoleOnAxisError,
                   SimulationDivergedError, NotConvergedError, NotSettledError, RuntimeError)


def _emit(args, name: str, text: str):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, name), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _read_json(path):
    if path is None:
        raise ConfigError("--config is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def _controllers(args):
    if args.config is None:
        raise ConfigError("--config is required")
    return load_config(args.config)


# ----------------------------------------------------------------- crone

def _crone_cfg(doc) -> CroneConfig:
    if "type" in doc:
        c = ControllerConfig.from_dict(doc)
        if c.type != "FOSRE-CgLp":
            raise ConfigError("crone needs a FOSRE-CgLp controller or a CRONE document")
        return crone_settings(c.lam, c.w_l, c.crone_w_h, c.crone_n)
    units = doc.get("units")
    if units not in ("Hz", "rad/s"):
        raise ConfigError('CRONE document needs "units": "Hz" or "rad/s"')
    k = TWO_PI if units == "Hz" else 1.0
    try:
        return CroneConfig(float(doc["lam"]), k * float(doc["w_l"]), k * float(doc["w_h"]),
                           doc.get("n"))
    except KeyError as exc:
        raise ConfigError(f"CRONE document lacks {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_crone(args) -> int:
    """CSV of the CRONE chain against the exact fractional factor."""
    cfg = _crone_cfg(_read_json(args.config))
    n = args.points or 50
    w = np.logspace(math.log10(cfg.w_l), math.log10(cfg.w_h / 10), n)
    approx = crone_place(cfg).response(w)
    exact = fractional_response(cfg.lam, cfg.w_l, w)
    lines = ["w_rad_s,approx_db,approx_deg,exact_db,exact_deg"]
    for wi, a, e in zip(w, approx, exact):
        lines.append(",".join(f"{v:.10g}" for v in (
            wi, 20 * math.log10(abs(a)), math.degrees(np.angle(a)),
            20 * math.log10(abs(e)), math.degrees(np.angle(e)))))
    _emit(args, "crone.csv", "\n".join(lines) + "\n")
    gain, phase = approximation_error(cfg, n)
    if gain > 1.5 or phase > 6.0:
        print(f"approximation error {gain:.3g} dB / {phase:.3g} deg exceeds "
              "1.5 dB / 6 deg", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------- hosidf

def _orders(text: str):
    try:
        orders = tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --orders {text!r}") from exc
    if any(n < 1 for n in orders):
        raise ConfigError("orders must be positive")
    return orders


def cmd_hosidf(args) -> int:
    """Open-loop (or controller / lag) HOSIDF CSV per configured controller."""
    G = plant()
    fmin, fmax = args.fmin or 0.1, args.fmax or 1000.0
    if not 0 < fmin < fmax:
        raise ConfigError("need 0 < fmin < fmax")
    freqs = TWO_PI * np.logspace(math.log10(fmin), math.log10(fmax), args.points or 200)
    orders = _orders(args.orders)
    for cfg in _controllers(args):
        _, ctrl = resolve_controller(cfg, G)
        if args.scope == "lag":
            if ctrl.lag is None:
                raise ConfigError(f"{cfg.name} has no reset lag")
            table = hosidf_sweep(ctrl.lag, freqs, orders)
        else:
            table = hosidf_sweep(ctrl, freqs, orders,
                                 plant=G if args.scope == "open-loop" else None)
        _emit(args, f"hosidf_{cfg.name}.csv", table.to_csv())
    return EXIT_OK


# -------------------------------------------------------------- simulate

def _reference(text: str):
    kind, _, val = text.partition(":")
    try:
        if kind == "sine":
            return Sinusoid(TWO_PI * float(val)), float(val)
        if kind == "step":
            return Step(float(val) if val else 1.0), None
        if kind == "zero":
            return Zero(), None
    except ValueError as exc:
        raise ConfigError(f"bad --reference {text!r}") from exc
    raise ConfigError("--reference must be sine:<Hz>, step[:<amplitude>] or zero")


def cmd_simulate(args) -> int:
    """Closed-loop trace CSV and metrics JSON."""
    G = plant()
    ref, f_hz = _reference(args.reference)
    for cfg in _controllers(args):
        _, ctrl = resolve_controller(cfg, G)
        if f_hz is not None:
            base = study_config(f_hz)
            dt = args.dt or base.dt
            duration = args.duration or base.duration
            periods = int(round(duration * f_hz))
            guard = STUDY_RESET_GUARD if args.reset_guard is None else args.reset_guard
            sim = SimConfig(dt=dt, duration=duration, warmup_periods=periods // 2,
                            measure_periods=periods - periods // 2,
                            min_inter_reset=guard / f_hz if guard > 0 else None)
        else:
            guard = args.reset_guard or 0.0
            sim = SimConfig(dt=args.dt or 1e-5, duration=args.duration or 1.0,
                            min_inter_reset=guard if guard > 0 else None)
        tr = simulate_closed_loop(ctrl, G, ref, sim, store_states=args.states)
        if f_hz is not None:
            m = steady_state_metrics(tr, TWO_PI * f_hz, sim).as_dict()
        elif isinstance(ref, Step):
            m = step_metrics(tr).as_dict()
        else:
            m = {"rms": float(np.sqrt(np.mean(tr.e**2)))}
        m["resets"] = len(tr.reset_times)
        _emit(args, f"trace_{cfg.name}.csv", tr.to_csv(decimate=args.decimate))
        _emit(args, f"metrics_{cfg.name}.json", _json(m))
    return EXIT_OK


# ------------------------------------------------------------- stability

def cmd_stability(args) -> int:
    """Reset-matrix eigenvalue lemma margin and H_beta outcome per controller as JSON."""
    G = plant()
    out = {}
    for cfg in _controllers(args):
        _, ctrl = resolve_controller(cfg, G)
        cl = build_closed_loop(G, ctrl)
        entry = {"n_p": cl.n_p, "n_nr": cl.n_nr, "n_r": cl.n_r}
        if ctrl.lag is not None:
            l1 = lemma1_check(ctrl.lag)
            entry["lemma1"] = {"holds": l1.holds, "margin": l1.margin,
                               "worst_delta": l1.worst_delta}
        cert = search_hbeta(cl, seed=args.seed)
        entry["hbeta_found"] = cert is not None
        if cert is not None:
            rep = verify_hbeta(cl, cert)
            entry["hbeta"] = rep.as_dict()
            entry["beta"] = [float(b) for b in np.ravel(cert.beta)]
        out[cfg.name] = entry
    _emit(args, "stability.json", _json(out))
    return EXIT_OK


# ------------------------------------------------------------------ tune

_TUNE_DEFAULTS = {"w_i": 15.0, "w_d": 100.0, "w_t": 225.0, "w_f": 1500.0}


def cmd_tune(args) -> int:
    """FOSRE recipe from a TuneSpec document (Hz); writes a config row."""
    doc = dict(_read_json(args.config))
    if doc.pop("units", None) != "Hz":
        raise ConfigError('tune spec must declare "units": "Hz"')
    name = doc.pop("name", "FOSRE-tuned")
    linear = {k: float(doc.pop(k, v)) for k, v in _TUNE_DEFAULTS.items()}
    try:
        w_lb, w_c = TWO_PI * float(doc.pop("w_lb")), TWO_PI * float(doc.pop("w_c"))
    except KeyError as exc:
        raise ConfigError(f"tune spec lacks {exc}") from exc
    extra = {k: doc.pop(k) for k in list(doc)
             if k in ("pm_target", "max_evals", "band_decades", "n_band", "psi_c_limit",
                      "psi_lb_tol", "lam0", "beta0")}
    if doc:
        raise ConfigError(f"unknown tune fields: {sorted(doc)}")
    try:
        spec = TuneSpec(w_lb, w_c, seed=args.seed, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    res = tune_fosre(spec)
    row = ControllerConfig(name, "FOSRE-CgLp", w_ra=res.w_ra / TWO_PI, beta=res.beta,
                           gamma=1.0, lam=res.lam, w_l=res.w_l / TWO_PI, **linear)
    G = plant()

    def build(g):
        return resolve_controller(row.replace(gamma=g), G, w_c / TWO_PI)[1]

    gamma = pick_gamma(build, G, spec.pm_target, w_c)
    final, _ = resolve_controller(row.replace(gamma=gamma), G, w_c / TWO_PI)
    out = {"units": "Hz", **{k: v for k, v in final.to_dict().items() if k != "units"},
           "tuning": {"converged": res.converged, "objective_deg": res.objective,
                      "psi_lb_deg": res.psi_lb, "psi_c_deg": res.psi_c}}
    _emit(args, "tuned.json", _json(out))
    return EXIT_OK if res.converged else EXIT_NUMERIC


# ----------------------------------------------------------------- repro

def cmd_repro_cli(args) -> int:
    out = args.out or "repro_out"
    report = cmd_repro(out, seed=args.seed,
                       log=lambda m: print(m, file=sys.stderr) if args.verbose else None)
    with open(os.path.join(out, "report.txt")) as fh:
        sys.stdout.write(fh.read())
    return EXIT_MISMATCH if report["hard_failures"] else EXIT_OK


# ------------------------------------------------------------------ main

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--fmin", type=float, help="lowest frequency, Hz")
    common.add_argument("--fmax", type=float, help="highest frequency, Hz")
    common.add_argument("--points", type=int, help="number of frequency points")
    common.add_argument("--orders", default="1,3,5", help="harmonic orders, comma separated")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed")
    common.add_argument("--dt", type=float, help="simulation step, s")
    common.add_argument("--duration", type=float, help="simulated time, s")
    p = argparse.ArgumentParser(prog="resetlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("crone", parents=[common], help="CRONE approximation vs exact")
    h = sub.add_parser("hosidf", parents=[common], help="describing-function sweep")
    h.add_argument("--scope", choices=("open-loop", "controller", "lag"), default="open-loop")
    s = sub.add_parser("simulate", parents=[common], help="closed-loop simulation")
    s.add_argument("--reference", default="sine:1", help="sine:<Hz>, step[:<amp>] or zero")
    s.add_argument("--decimate", type=int, default=1, help="keep every k-th sample")
    s.add_argument("--states", action="store_true", help="include states in the trace")
    s.add_argument("--reset-guard", type=float,
                   help="minimum time between resets: reference periods for sine "
                        "references (default 0.25), seconds otherwise (default 0); "
                        "0 resets at every crossing")
    sub.add_parser("stability", parents=[common], help="eigenvalue lemma and H_beta checks")
    sub.add_parser("tune", parents=[common], help="FOSRE tuning recipe")
    r = sub.add_parser("repro", parents=[common], help="regenerate the case study")
    r.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    return p


_COMMANDS = {"crone": cmd_crone, "hosidf": cmd_hosidf, "simulate": cmd_simulate,
             "stability": cmd_stability, "tune": cmd_tune, "repro": cmd_repro_cli}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining value errors come from numerical routines (no crossing,
        # singular matrices, unreachable targets)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
