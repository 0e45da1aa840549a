"""
Catching a cheating server with one trap
========================================

Isolating a vertex by turning its neighbours into dummies gives a trap
whose honest outcome Alice knows. We compute, exactly, how often each
single-qubit Pauli deviation slips past the trap while corrupting the
output.
"""

import numpy as np

from vubqc import analysis as an
from vubqc import pattern as pt
from vubqc import protocol as pr
from vubqc import verification as vf

base = pt.line_pattern([0, 0], with_input=False)
trap_pattern, config = vf.make_trap_pattern(base, 0)
print("trap:", sorted(config.traps), "dummies:", sorted(config.dummies))

# an honest Bob always passes
client = pr.Client(trap_pattern, "P3", np.random.default_rng(3))
_, outcome = pr.run_session(client, pr.HonestServer(client.env, np.random.default_rng(4)))
print("honest run accepted:", outcome.accept)

# exact probability of accepting a wrong output, per attack
for mode in (pt.QUANTUM, pt.CLASSICAL):
    b = pt.with_output_mode(base, mode)
    bound = an.Poly(b.m, classical=mode == pt.CLASSICAL)
    results = [an.p_incorrect_exact(b, a) for a in an.all_single_pauli_attacks(b)]
    worst = max(results, key=lambda e: e.p_incorrect)
    print(f"{mode:>9} output: worst attack {an.describe_attack(worst.attack)} "
          f"gives {worst.p_incorrect:.3f}, bound {float(bound.value):.3f}")
