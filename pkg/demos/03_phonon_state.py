"""
Squeezing a pseudo-phonon on a chain of seven
=============================================

Squeezing the k=1 phonon spreads entanglement over every pair of sites.
We build the target, synthesize it, then look at the ellipses and at how the
number of entangled pairs grows along the plan.
"""

import math

import numpy as np

from chaincontrol.gaussian import (
    PhononTarget,
    all_ellipses,
    apply_symplectic,
    cradle_to_site,
    pair_ellipses,
    phonon_target_symplectic,
    symplectic_eigenvalues,
    vacuum_state,
)
from chaincontrol.synthesis import correlation_trace, synthesize

N = 7
target = PhononTarget(N, k1=1, k2=1, xi=1.0)
plan = synthesize(phonon_target_symplectic(target), seed=0)
print(f"{len(plan.steps)} couplings, residual {plan.residual:.1e}")

sigma = cradle_to_site(apply_symplectic(vacuum_state(N - 1), plan.product()))
print("symplectic eigenvalues:", np.round(symplectic_eigenvalues(sigma), 12))

# Single-site ellipses turn by a fixed step from one site to the next.
angles = [pair_ellipses(sigma, n, n)[0].angle for n in range(1, N + 1)]
steps = [math.remainder(b - a, math.pi) for a, b in zip(angles, angles[1:])]
print("angle steps:", np.round(steps, 6), " 2pi/7 =", round(2 * math.pi / N, 6))

reports = all_ellipses(sigma)
print(f"{sum(r.kind == 'sum' for r in reports)} sum and "
      f"{sum(r.kind == 'difference' for r in reports)} difference ellipses")
for r in reports[:3]:
    print(f"  {r.pair} {r.kind}: axes {r.semi_major:.3f}/{r.semi_minor:.3f} at {r.angle:+.3f} rad")

# Entangled pairs never outrun the pairs among oscillators touched so far.
for rec in correlation_trace(plan)[::6]:
    print(f"step {rec.step:2d}: {rec.entangled_pairs:2d} entangled pairs (bound {rec.touched_pair_bound})")
