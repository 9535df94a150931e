"""Describing functions of FOSRE and SOSRE lag elements.

The first-harmonic gain of a CgLp lag is flat while its phase lags less than
the base filter; psi is the phase of the nonlinear part. Where psi crosses
zero the third harmonic vanishes and the element acts linearly.
"""

import math

import numpy as np

from resetlab.hosidf import describing_function, omega_lb_realized, psi
from resetlab.repro import fig4_elements

TP = 2 * math.pi
fosre, sosre = fig4_elements()

print(f"{'f [Hz]':>8} {'|G1| FOSRE':>11} {'psi FOSRE':>10} {'|G3| FOSRE':>11} "
      f"{'|G1| SOSRE':>11} {'psi SOSRE':>10}")
for f in np.logspace(-1, 2, 13):
    w = TP * f
    print(f"{f:8.3f} {abs(describing_function(fosre.lag, w)):11.4f} "
          f"{math.degrees(psi(fosre.lag, w)):10.2f} "
          f"{abs(describing_function(fosre.lag, w, 3)):11.2e} "
          f"{abs(describing_function(sosre.lag, w)):11.4f} "
          f"{math.degrees(psi(sosre.lag, w)):10.2f}")

w_lb = omega_lb_realized(fosre.lag, TP * 0.5, TP * 100)
print(f"\nFOSRE linear-behavior frequency: {w_lb / TP:.3f} Hz, "
      f"|G3| there = {abs(describing_function(fosre.lag, w_lb, 3)):.1e}")
