"""
Hiding a computation among traps
================================

The full verifiable protocol embeds the computation on a dotted complete
graph with 3N primary vertices. One third carries the computation, one
third are white traps, and the last third hides black traps on the
subdivision vertices between its members.
"""

import numpy as np

from vubqc import analysis as an
from vubqc import pattern as pt
from vubqc import protocol as pr
from vubqc import verification as vf

rng = np.random.default_rng(7)
circuit = pt.line_pattern([0, 0], output_mode=pt.CLASSICAL)
choice = vf.choose_pattern(1, circuit, 3, rng)
print("partition:", [sorted(p) for p in choice.partition])
print("white traps:", sorted(choice.traps.white), "black traps:", sorted(choice.traps.black))
print("qubits sent:", choice.pattern.m)

for b in (0, 1):
    vo = vf.run_protocol8(choice, rng, classical_input={0: b})
    print(f"input {b}: output {vo.bits}, accepted {vo.accept}")

# Bob flips the reported outcome of a white trap and is caught
white = sorted(choice.traps.white)[0]
step = choice.pattern.order.index(white) + 1
vo = vf.run_protocol8(choice, rng, pr.AttackSpec(((step, pr.ResultFlip()),)), {0: 1})
print("flipping a trap result, accepted:", vo.accept)

# how often a random partition puts a given position on a trap
stats = an.partition_stats(2, [(0,), (0, 1), (0, 1, 2)])
print("white trap probability:", set(map(str, stats.white.values())))
print("black trap probability:", set(map(str, stats.black.values())))
print("miss probabilities for 1, 2, 3 flips:", [str(stats.miss[k]) for k in range(3)])
