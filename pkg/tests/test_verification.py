import itertools
import math

import numpy as np
import pytest

from vubqc import graphs as gr
from vubqc import pattern as pt
from vubqc import protocol as pr
from vubqc import verification as vf


def test_trap_pattern_structure():
    base = pt.line_pattern([1, 2, 3], with_input=False)
    tp, cfg = vf.make_trap_pattern(base, 2)
    assert tp.traps == {2} and tp.dummies == {1, 3}
    assert cfg.dummies == tp.dummies and cfg.traps == {2}
    assert tp.angle(2) == 0
    with pytest.raises(pt.PatternError):
        vf.make_trap_pattern(pt.line_pattern([1, 2]), 1)  # would make the input a dummy
    with pytest.raises(pt.PatternError):
        vf.make_trap_pattern(base, 9)


def test_a_vertex_position_is_bijection():
    for n in (2, 3, 6, 9):
        slots = [vf.a_vertex_position(n, i, j) for i in range(1, n) for j in range(i + 1, n + 1)]
        assert sorted(slots) == list(range(1, n * (n - 1) // 2 + 1))


def test_random_linear_extension_respects_order():
    rng = np.random.default_rng(0)
    before = {2: {0}, 3: {1, 2}}
    seen = set()
    for _ in range(50):
        order = vf.random_linear_extension([0, 1, 2, 3], before, rng)
        pos = {v: k for k, v in enumerate(order)}
        assert pos[0] < pos[2] and pos[1] < pos[3] and pos[2] < pos[3]
        seen.add(tuple(order))
    assert len(seen) > 1
    with pytest.raises(ValueError):
        vf.random_linear_extension([0, 1], {0: {1}, 1: {0}}, rng)


@pytest.mark.parametrize("n", [2, 3])
def test_choose_pattern_structure(n):
    circuit = pt.line_pattern([1] * (n - 1), with_input=False, output_mode=pt.CLASSICAL)
    rng = np.random.default_rng(n)
    for _ in range(10):
        ch = vf.choose_pattern(1, circuit, n, rng)
        p = ch.pattern
        total = 3 * n
        assert p.m == total * (total + 1) // 2 == len(p.order)
        assert ch.traps.white == ch.partition[1]
        assert len(ch.traps.black) == math.comb(n, 2)
        a_count = total * (total - 1) // 2
        assert set(p.order[:a_count]) == set(range(total, p.m))
        # the A order follows the P order through the slot formula
        rank = {v: k + 1 for k, v in enumerate(ch.p_order)}
        d = gr.dotted_complete(total)
        for k, a in enumerate(p.order[:a_count]):
            i, j = sorted(rank[x] for x in d.edge_of[a])
            assert vf.a_vertex_position(total, i, j) == k + 1
        # every trap is isolated by dummies and the computation sits in part 1
        assert set(ch.p_map.values()) <= ch.partition[0]
        comp = p.deps.comp
        assert set(comp.vertices) == set(ch.p_map.values())


def test_choose_pattern_rejects_bad_requests():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        vf.choose_pattern(1, pt.line_pattern([1]), 2, rng)  # quantum output
    with pytest.raises(ValueError):
        vf.choose_pattern(1, pt.line_pattern([1, 1, 1], output_mode=pt.CLASSICAL), 2, rng)


def test_protocol8_trap_flip_detected():
    circuit = pt.line_pattern([0, 0], output_mode=pt.CLASSICAL)
    rng = np.random.default_rng(1)
    for _ in range(10):
        ch = vf.choose_pattern(1, circuit, 3, rng)
        white = sorted(ch.traps.white)[0]
        step = ch.pattern.order.index(white) + 1
        attack = pr.AttackSpec(((step, pr.ResultFlip()),))
        vo = vf.run_protocol8(ch, rng, attack, {0: 1})
        assert vo.accept is False


def test_repetition_decode():
    rep = vf.RepetitionClassical(3)
    assert rep.decode((1, 1, 1)) == ((1,), False)
    assert rep.decode((1, 0, 1)) == ((1,), True)
    assert rep.decode((0, 1, 0, 1, 0, 1)) == ((0, 1), False)
    assert vf.RepetitionClassical(1).decode((1, 0)) == ((1, 0), False)
    with pytest.raises(ValueError):
        vf.RepetitionClassical(0)


def test_repetition_parameter_record():
    rep = vf.RepetitionClassical(3)
    assert rep.lam == 15 and rep.levels == 1


def test_disjoint_copies():
    p = pt.line_pattern([1, 2], output_mode=pt.CLASSICAL)
    cp = vf.disjoint_copies(p, 3)
    assert cp.m == 9 and cp.inputs == (0, 3, 6) and cp.outputs == (2, 5, 8)
    assert len(gr.connected_components(cp.graph)) == 3


@pytest.mark.parametrize("d,levels", [(1, 0), (2, 1), (3, 1), (4, 2), (9, 2), (10, 3), (27, 3)])
def test_rhg_parameters(d, levels):
    e = vf.ExternalRHG(d)
    assert e.lam == 5 * d and e.levels == levels
    assert len(e.thickness) == max(levels, 1) == len(e.scale)
    assert e.thickness[-1] == d
    if levels >= 2:
        assert e.thickness[0] == 1
    assert all(b == 3 * a for a, b in zip(e.thickness[:-2], e.thickness[1:-1]))
    assert e.scale[0] in (5, e.lam) and e.scale[-1] == e.lam
    with pytest.raises(NotImplementedError):
        e.encode(None)


def test_rhg_lattice_shape():
    g = vf.rhg_lattice(1, 1, 1)
    # a single cube: 6 faces and 12 edges, each face touches 4 edges
    assert g.m == 18 and len(g.edges) == 24
    faces = [v for v in g.vertices if g.degree(v) == 4]
    assert len(faces) == 6
    g2 = vf.rhg_lattice(2, 2, 2)
    assert max(g2.degree(v) for v in g2.vertices) == 4
    with pytest.raises(gr.GraphError):
        vf.rhg_lattice(0, 1, 1)


def test_incorrect_projector_properties():
    ideal = np.array([0.6, 0.8])
    eta = np.array([1, 1j]) / np.sqrt(2)
    P = vf.incorrect_projector(ideal, eta)
    assert np.allclose(P @ P, P) and np.allclose(P, P.conj().T)
    assert np.allclose(P @ np.kron(ideal, eta), 0)
    orth = np.array([0.8, -0.6])
    assert abs(np.vdot(np.kron(orth, eta), P @ np.kron(orth, eta)) - 1) < 1e-12
    Pc = vf.incorrect_projector((1, 0), None)
    assert np.allclose(np.diag(Pc), [1, 1, 0, 1])
    mixed = np.diag([0.5, 0.5, 0, 0])
    assert np.allclose(np.diag(vf.incorrect_projector(mixed, None)), [0, 0, 1, 1])
    with pytest.raises(ValueError):
        vf.incorrect_projector(np.array([1.0, 1.0]), None)
