"""CRONE approximation of s^lambda over a finite band.

Shows how the recursive zero/pole chain tracks the ideal fractional
integrator in gain and phase, and how the error shrinks as sections are added.
"""

import numpy as np

from resetlab.crone import CroneConfig, approximation_error, crone_place, minimum_sections

for lam in (-0.1, -0.5, -1.0):
    cfg = CroneConfig(lam, 1.0, 1e4, 5)
    zpk = crone_place(cfg)
    gain, phase = approximation_error(cfg)
    print(f"lambda={lam:+.1f}: zeros {np.round(-zpk.zeros, 2)}")
    print(f"             poles {np.round(-zpk.poles, 2)}")
    print(f"             max error {gain:.3f} dB, {phase:.2f} deg")

print("\nsections vs worst error at lambda=-0.5 over [1, 1e4] rad/s")
print("minimum sections:", minimum_sections(1.0, 1e4))
for n in (5, 8, 12, 20):
    g, p = approximation_error(CroneConfig(-0.5, 1.0, 1e4, n))
    print(f"  N={n:2d}: {g:.3f} dB, {p:.2f} deg")
