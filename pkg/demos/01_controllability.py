"""
Which transformations can nearest-neighbour springs reach?
==========================================================

Every spring acts only on the relative coordinate of its two oscillators.
Repeated commutators of those generators still fill the whole symplectic
algebra of the cradle modes, which is what makes arbitrary targets reachable.
"""

import numpy as np

from chaincontrol.cradle import (
    chain_generators,
    controllability_dimension,
    cradle_basis,
    embed_coupling,
    lie_closure,
)
from chaincontrol.symplectic import squeeze

# The cradle basis for four oscillators. Row j moves the first j oscillators
# together against oscillator j+1; the last row is the total displacement.
np.set_printoptions(precision=3, suppress=True)
print(cradle_basis(4).position_matrix)

# A squeeze on spring 2 lands on cradle modes 1 and 2 only.
D = embed_coupling(2, squeeze(0.3), 4).matrix
print(np.round(D, 3))

# Closing the generator set under commutators, round by round.
closure = lie_closure(chain_generators(3))
print("new directions per round:", closure.growth)

for modes in range(1, 6):
    dim = controllability_dimension(modes)
    print(f"{modes} cradle modes: {dim} generators (full algebra has {modes * (2 * modes + 1)})")
