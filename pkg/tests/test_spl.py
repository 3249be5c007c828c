import json
import re

import pytest
from hypothesis import given

from splc import lang
from splc.lang import check_closed, parse
from splc.spl import (ASSIGN, COND, LOOP, LOOP_BACK, LOOP_EXIT, PARALLEL, SERIES, EdgeLabel,
                      SplGraph, atomic, cfg_of, decomposition_of, decomposition_to_json,
                      graph_to_json, is_closed_graph, loop, parallel, recompose, series,
                      to_dot, vertex_count)

from conftest import DECOMPO, FIG_EX, build
from strategies import programs


def assign(target):
    return EdgeLabel(ASSIGN, target=target, expr=lang.Num(1))


# --- operations -----------------------------------------------------------------

@pytest.mark.parametrize("kind,role", [("eps", "t"), ("break", "b"), ("continue", "c")])
def test_atomic(kind, role):
    g = atomic(kind)
    assert len(g.vertices) == 4 and len(set(g.boundary)) == 4
    assert list(g.edges) == [(g.s, getattr(g, role))]


def test_series_of_two_eps():
    g1, g2 = atomic(), atomic()
    g = series(g1, g2)
    assert len(g.vertices) == 5
    assert set(g.edges) == {(g1.s, g1.t), (g1.t, g2.t)}
    assert g.boundary == (g1.s, g2.t, g1.b, g1.c)


def test_series_redirects_break_to_merged_b():
    g1, g2 = atomic("break"), atomic()
    g = series(g1, g2)
    assert set(g.edges) == {(g1.s, g.b), (g1.t, g.t)}


def test_series_of_two_breaks_keeps_both_edges():
    g1, g2 = atomic("break"), atomic("break")
    g = series(g1, g2)
    assert set(g.edges) == {(g.s, g.b), (g1.t, g.b)}


def test_parallel_collapses_duplicate_edges():
    g = parallel(atomic(label=assign("a")), atomic(label=assign("b")))
    assert len(g.vertices) == 4
    assert list(g.edges) == [(g.s, g.t)]
    assert {lab.target for lab in g.labels[(g.s, g.t)]} == {"a", "b"}


def test_parallel_merges_shared_break_edge():
    def six():
        return series(series(atomic("break", assign("x")), atomic()), atomic())
    g1, g2 = six(), six()
    assert len(g1.vertices) == 6
    g = parallel(g1, g2)
    assert len(g.vertices) == 8
    into_b = [e for e in g.edges if e == (g.s, g.b)]
    assert len(into_b) == 1
    assert len(g.labels[(g.s, g.b)]) == 1  # identical labels collapse too


def test_parallel_break_continue():
    g = parallel(atomic("break"), atomic("continue"))
    assert len(g.vertices) == 4
    assert set(g.edges) == {(g.s, g.b), (g.s, g.c)}


def test_parallel_condition_labels_go_on_branch_starts():
    cond = lang.Name("p")
    g1, g2 = atomic(label=assign("a")), atomic("break", assign("b"))
    g = parallel(g1, g2, cond)
    kinds = {e: {(l.kind, l.taken) for l in labs} for e, labs in g.labels.items()}
    assert kinds[(g.s, g.t)] == {(ASSIGN, None), (COND, True)}
    assert kinds[(g.s, g.b)] == {(ASSIGN, None), (COND, False)}


def test_loop_adds_frame():
    g1 = atomic()
    g = loop(g1, lang.Name("p"))
    assert len(g.vertices) == 8 and len(g.edges) == 6
    assert set(g.edges) - set(g1.edges) == {(g.s, g1.s), (g.s, g.t), (g1.t, g.s),
                                             (g1.c, g.s), (g1.b, g.t)}
    assert {l.taken for l in g.labels[(g.s, g1.s)]} == {True}
    assert {l.taken for l in g.labels[(g.s, g.t)]} == {False}
    assert {l.kind for l in g.labels[(g1.t, g.s)]} == {LOOP_BACK}
    assert {l.kind for l in g.labels[(g1.b, g.t)]} == {LOOP_EXIT}


def test_loop_around_six_vertices():
    g1 = series(series(atomic("break"), atomic()), atomic())
    g = loop(g1)
    assert len(g.vertices) == 10 and len(g.edges) == len(g1.edges) + 5


def test_nested_loops():
    g = loop(loop(atomic()))
    assert (len(g.vertices), len(g.edges)) == (12, 11)


def test_operands_must_be_disjoint():
    g = atomic()
    with pytest.raises(ValueError):
        series(g, g)
    with pytest.raises(ValueError):
        parallel(g, g)


@pytest.mark.parametrize("g,closed", [
    (atomic(), True), (atomic("break"), False), (atomic("continue"), False),
    (loop(atomic("break")), True),
])
def test_is_closed_graph(g, closed):
    assert is_closed_graph(g) is closed


# --- cfg_of ---------------------------------------------------------------------

def test_decompo_program():
    g, d = build(DECOMPO)
    assert (len(g.vertices), len(g.edges)) == (10, 9)
    assert is_closed_graph(g)
    assert d.root.kind == LOOP
    par = d.root.children[0]
    assert par.kind == PARALLEL
    assert [c.kind for c in par.children] == [SERIES, SERIES]
    assert [[x.kind for x in c.children] for c in par.children] == [["eps", "break"],
                                                                   ["eps", "continue"]]


def test_decompo_condition_shares_edge_with_statement():
    g, _ = build(DECOMPO)
    hit = [labs for labs in g.labels.values()
           if {l.kind for l in labs} == {COND, ASSIGN}]
    assert len(hit) == 2  # x := x - y and y := y - x, each with the if condition


def test_skip_is_eps():
    g, d = cfg_of(parse("skip"))
    assert d.root.kind == "eps"
    assert g.boundary == (1, 2, 3, 4)
    assert list(g.edges) == [(1, 2)]


def test_fig_ex_numbering():
    g, _ = build(FIG_EX)
    assert sorted(g.edges) == [(1, 2), (2, 3), (3, 4), (3, 5), (4, 6), (5, 6), (6, 7), (7, 8)]
    assert g.boundary == (1, 8, 9, 10)


def test_decomposition_of_tuples():
    g, d = decomposition_of(("loop", ("series", "eps", "break")))
    assert d.root.kind == LOOP
    assert len(g.vertices) == 9
    d.check()


def test_root_boundary_and_postorder():
    g, d = build(DECOMPO)
    assert d.root.boundary == g.boundary
    seen = set()
    for i, node in enumerate(d.postorder):
        assert node.index == i
        assert all(ch.index in seen for ch in node.children)
        seen.add(i)


# --- export ---------------------------------------------------------------------

_DOT_STMT = re.compile(r'^\s+(\d+|n\d+)( -> (\d+|n\d+))?( \[.*\])?;$')


def _dot_shape(text):
    lines = text.strip().splitlines()
    assert re.match(r"^digraph \w+ \{$", lines[0]) and lines[-1] == "}"
    nodes = edges = 0
    for line in lines[1:-1]:
        if line.strip().startswith("node "):
            continue
        m = _DOT_STMT.match(line)
        assert m, line
        if m.group(2):
            edges += 1
        else:
            nodes += 1
    return nodes, edges


def test_dot_for_eps():
    assert _dot_shape(to_dot(atomic())) == (4, 1)


def test_dot_for_decompo():
    g, d = build(DECOMPO)
    assert _dot_shape(to_dot(g)) == (10, 9)
    assert _dot_shape(to_dot(d)) == (len(d), len(d) - 1)


def test_dot_escapes_labels():
    g, _ = build('x := a / 2; if x < 1 then skip else skip fi')
    assert _dot_shape(to_dot(g))


def test_json_round_trips_through_text():
    g, d = build(DECOMPO)
    gj = json.loads(json.dumps(graph_to_json(g)))
    assert gj["vertices"] == sorted(g.vertices)
    assert len(gj["edges"]) == len(gj["labels"]) == 9
    assert gj["boundary"] == {"S": g.s, "T": g.t, "B": g.b, "C": g.c}
    tree = decomposition_to_json(d)
    assert tree["kind"] == "loop" and len(tree["children"]) == 1
    assert tree["children"][0]["kind"] == "parallel"


# --- properties -----------------------------------------------------------------

@given(programs)
def test_recomposition_reproduces_graph(ast):
    g, d = cfg_of(ast)
    g.check()
    d.check()
    h = recompose(d.root)
    assert h.vertices == g.vertices and set(h.edges) == set(g.edges)
    assert h.boundary == g.boundary


@given(programs)
def test_closedness_equivalence(ast):
    g, _ = cfg_of(ast)
    assert check_closed(ast) == is_closed_graph(g)


@given(programs)
def test_vertex_count_recurrence(ast):
    g, d = cfg_of(ast)
    assert vertex_count(ast) == len(g.vertices)
    for node in d.postorder:
        n = len(node.vertex_set())
        kids = [len(c.vertex_set()) for c in node.children]
        if node.kind == SERIES:
            assert n == kids[0] + kids[1] - 3
        elif node.kind == PARALLEL:
            assert n == kids[0] + kids[1] - 4
        elif node.kind == LOOP:
            assert n == kids[0] + 4
        else:
            assert n == 4


@given(programs)
def test_node_edges_are_children_plus_own(ast):
    _, d = cfg_of(ast)
    for node in d.postorder:
        union = set(node.own_edges)
        for c in node.children:
            union |= c.edge_set()
        assert node.edge_set() == union
        if node.kind == LOOP:
            assert len(node.own_edges) == 5
        assert len(set(node.boundary)) == 4


@given(programs)
def test_vertex_ids_are_dense(ast):
    g, _ = cfg_of(ast)
    assert sorted(g.vertices) == list(range(1, len(g.vertices) + 1))
    assert g.s == 1


def test_graph_equality_ignores_construction_order():
    g1, _ = build("a := 1; b := 2")
    g2, _ = build("a := 1; b := 2")
    assert g1 == g2
    assert isinstance(g1, SplGraph)
