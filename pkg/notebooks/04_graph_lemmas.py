"""
Shaping graphs with Pauli measurements
======================================

A Z measurement deletes a vertex; a Y measurement on a vertex of degree two
joins its neighbours. Measuring the subdivision vertices of the dotted
complete graph this way carves out any graph on N vertices.
"""

import numpy as np

from vubqc import analysis as an
from vubqc import graphs as gr

g = gr.OpenGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
for basis in ("Z", "Y"):
    print(basis, "on vertex 1:", [an.pauli_measurement_fidelity(g, 1, basis, s) for s in (0, 1)])

target = gr.OpenGraph.from_edges(4, [(0, 1), (1, 2), (1, 3)])
plan = gr.reduction_plan(4, target)
d = gr.dotted_complete(4)
print("dotted complete graph:", d.graph.m, "vertices,", len(d.graph.edges), "edges")
print("bridges:", sorted(a for a, op in plan.assignment.items() if op == gr.BRIDGE))
print("reduction fidelity:", an.reduction_fidelity(4, target, np.random.default_rng(0)))
