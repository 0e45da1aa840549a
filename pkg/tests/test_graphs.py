import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vubqc import graphs as gr


def test_line_graph_io():
    g = gr.line_graph(4)
    assert g.vertices == (0, 1, 2, 3)
    assert g.sorted_edges() == [(0, 1), (1, 2), (2, 3)]
    assert g.inputs == (0,) and g.outputs == (3,)
    assert gr.line_graph(3, with_input=False).inputs == ()


def test_invalid_inputs_raise():
    with pytest.raises(gr.GraphError) as exc:
        gr.line_graph(0)
    assert exc.value.kind == "invalid-dimension"
    with pytest.raises(gr.GraphError):
        gr.OpenGraph((0, 1), frozenset({(0, 0)}))
    with pytest.raises(gr.GraphError):
        gr.OpenGraph((0, 1), frozenset({(0, 2)}))
    with pytest.raises(gr.GraphError):
        gr.build_brickwork(2, 6)


def test_brickwork_2x5_edges():
    g = gr.build_brickwork(2, 5)
    idx = lambda i, j: gr.brickwork_index(2, i, j)  # noqa: E731
    vertical = {e for e in g.edges if abs(e[0] - e[1]) == 1 and min(e) % 2 == 0}
    assert vertical == {(idx(1, 3), idx(2, 3)), (idx(1, 5), idx(2, 5))}
    assert len(g.edges) == 8 + 2
    assert g.inputs == (idx(1, 1), idx(2, 1))
    assert gr.validate_flow(g, gr.brickwork_flow(2, 5))


def test_brickwork_13_columns_second_brick_offset():
    g = gr.build_brickwork(3, 13)
    idx = lambda i, j: gr.brickwork_index(3, i, j)  # noqa: E731
    # bricks at columns 7 and 9 join rows 2 and 3
    assert g.has_edge(idx(2, 7), idx(3, 7)) and g.has_edge(idx(2, 9), idx(3, 9))
    assert not g.has_edge(idx(1, 7), idx(2, 7))
    assert gr.validate_flow(g, gr.brickwork_flow(3, 13))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_dotted_complete_counts(n):
    d = gr.dotted_complete(n)
    pairs = n * (n - 1) // 2
    assert d.graph.m == n + pairs
    assert len(d.graph.edges) == 2 * pairs
    assert all(d.graph.degree(a) == 2 for a in d.a_vertices)
    for a, (i, j) in d.edge_of.items():
        assert d.a_vertex(i, j) == a == d.a_vertex(j, i)


def test_bridge_toggles_and_checks_degree():
    g = gr.OpenGraph.from_edges(3, [(0, 1), (1, 2)])
    assert gr.bridge(g, 1).sorted_edges() == [(0, 2)]
    tri = gr.OpenGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert gr.bridge(tri, 1).sorted_edges() == []
    with pytest.raises(gr.GraphError) as exc:
        gr.bridge(g, 0)
    assert exc.value.kind == "invalid-degree"
    assert gr.break_vertex(g, 1).sorted_edges() == []
    with pytest.raises(gr.GraphError):
        gr.break_vertex(g, 7)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_reduction_plan_reaches_every_graph(n):
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(2 ** len(pairs)):
        target = gr.OpenGraph.from_edges(n, [e for k, e in enumerate(pairs) if mask >> k & 1])
        reduced = gr.apply_plan(gr.dotted_complete(n).graph, gr.reduction_plan(n, target))
        assert reduced.vertices == target.vertices
        assert reduced.edges == target.edges


def test_reduction_plan_size_mismatch():
    with pytest.raises(gr.GraphError) as exc:
        gr.reduction_plan(3, gr.line_graph(2))
    assert exc.value.kind == "size-mismatch"


def test_partition_plan_splits_into_three_copies():
    parts = [{0, 3}, {1, 5}, {2, 4}]
    breaks = gr.partition_plan(2, parts)
    d = gr.dotted_complete(6)
    g = d.graph.without(breaks)
    comps = gr.connected_components(g)
    assert sorted(len(c) for c in comps) == [3, 3, 3]
    for part in parts:
        assert any(set(part) <= c for c in comps)
    with pytest.raises(gr.GraphError) as exc:
        gr.partition_plan(2, [{0, 1}, {2, 3}, {4}])
    assert exc.value.kind == "invalid-partition"


def test_flow_validation_rejects_bad_flow():
    g = gr.line_graph(3)
    assert gr.validate_flow(g, gr.line_flow(3))
    assert not gr.validate_flow(g, gr.Flow({0: 1, 1: 2}, (2, 1, 0)))


@st.composite
def open_graphs(draw):
    n = draw(st.integers(1, 7))
    pairs = list(itertools.combinations(range(n), 2))
    edges = draw(st.sets(st.sampled_from(pairs))) if pairs else set()
    ins = draw(st.lists(st.integers(0, n - 1), max_size=2, unique=True))
    outs = draw(st.lists(st.integers(0, n - 1), max_size=2, unique=True))
    return gr.OpenGraph.from_edges(n, edges, ins, outs)


@settings(max_examples=60, deadline=None)
@given(open_graphs())
def test_graph_json_round_trip(g):
    text = g.to_json()
    back = gr.OpenGraph.from_json(text)
    assert back == g
    assert back.to_json() == text
    assert json.loads(text)["m"] == g.m


def test_sparse_labels_round_trip():
    g = gr.OpenGraph((2, 5, 9), frozenset({(2, 9)}), (2,), (9,))
    back = gr.OpenGraph.from_json(g.to_json())
    assert back == g and back.vertices == (2, 5, 9)
