"""Stability checks for the reset closed loops.

The eigenvalue lemma bounds the reset matrix so that repeated resets cannot amplify the
state; its gamma boundary sits at |gamma| = 1. The H_beta condition asks for
a common quadratic Lyapunov function; it is equivalent to strict positive
realness of a transfer function built from the loop, which this demo
evaluates directly.
"""

from resetlab.config import TABLE1, plant
from resetlab.repro import resolve_controller
from resetlab.stability import (build_closed_loop, hbeta_spr_margin, lemma1_check,
                                search_hbeta, verify_hbeta)

G = plant()
for name in ("FOSRE-1", "SOSRE-1", "FOSRE-2", "SOSRE-2"):
    _, ctrl = resolve_controller(TABLE1[name], G)
    l1 = lemma1_check(ctrl.lag)
    cl = build_closed_loop(G, ctrl)
    cert = search_hbeta(cl, seed=0)
    spr = max(hbeta_spr_margin(cl, b) for b in (-10.0, -1.0, -0.1, 0.1, 1.0, 10.0))
    line = f"{name}: eigenvalue lemma holds={l1.holds} (margin {l1.margin:.3g}); "
    if cert is None:
        line += f"no H_beta certificate (best worst-case Re H/|H| over beta: {spr:.3g})"
    else:
        line += f"H_beta certificate verified={verify_hbeta(cl, cert).ok}"
    print(line)
