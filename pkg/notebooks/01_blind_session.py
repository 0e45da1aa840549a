"""
A blind session on a short line
===============================

Alice asks Bob to apply a product of J gates to her qubit without telling
him the angles. Every angle Bob sees is shifted by a secret θ and flipped
by a secret r, so the values he receives are uniformly spread.
"""

import numpy as np

from vubqc import analysis as an
from vubqc import pattern as pt
from vubqc import protocol as pr
from vubqc import sim

# the computation: three measured angles (units of π/4) on a four-vertex line
pattern = pt.line_pattern([1, 6, 3])
psi = np.array([0.6, 0.8j])

# the unblinded reference gives the output Alice is after
reference = pt.run_reference(pattern, psi, pt.Forced({})).vector()

# run the protocol: Alice and Bob only talk through newline-delimited JSON
client = pr.Client(pattern, "P1", np.random.default_rng(0), input_state=psi)
server = pr.HonestServer(client.env, np.random.default_rng(1))
transcript, outcome = pr.run_session(client, server)
for sender, line in transcript.lines[:4]:
    print(f"{sender:>5}: {line}")
print("angles Bob saw:", transcript.deltas())
print("fidelity with the reference:", sim.fidelity(outcome.output, reference))

# averaged over Alice's secrets, Bob's qubits look maximally mixed and every
# measurement angle is equally likely
report = an.blindness_audit(an.BlindConfig(pt.line_pattern([1, 6]), "P1"), an.Exact())
print("trace distance of Bob's state from I/2^m:", report.bob_state_distance)
print("angle histogram per step:")
print(np.asarray(report.delta_histogram))
