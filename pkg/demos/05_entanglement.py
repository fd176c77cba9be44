"""
Reading entanglement off a covariance matrix
============================================

Two-mode squeezed vacuum has a closed form, which makes it a handy check
on the log-negativity and on the sum and difference ellipses.
"""

import math

from chaincontrol.gaussian import log_negativity, pair_ellipses, two_mode_squeezed_state

for r in (0.25, 0.5, 1.0):
    sigma = two_mode_squeezed_state(r)
    s, d = pair_ellipses(sigma, 1, 2)
    print(f"r={r}: log-negativity {log_negativity(sigma, 1, 2):.6f} (2r = {2 * r})")
    print(f"   sum axes {s.semi_major:.4f}/{s.semi_minor:.4f}, "
          f"expected {math.exp(r) / math.sqrt(2):.4f}/{math.exp(-r) / math.sqrt(2):.4f}")
    print(f"   difference ellipse at {d.angle:+.4f} rad")
