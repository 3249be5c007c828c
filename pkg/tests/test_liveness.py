import pytest
from hypothesis import given
from hypothesis import strategies as st

from splc import lang
from splc.liveness import (DefUse, analyse, compute_liveness, def_use, graph_def_use,
                           interference_graph, interference_to_dot, lifetimes, liveness_to_json)
from splc.regalloc import split_webs
from splc.spl import ASSIGN, BREAK, LOOP, EdgeLabel, cfg_of

from conftest import build
from strategies import programs

REGALOC_EDGES = {frozenset(p) for p in
                 ["bc", "bf", "fc", "ac", "af", "dc", "df", "ec", "ed", "ef"]}


def a(target, src):
    return EdgeLabel(ASSIGN, target=target, expr=lang.parse_expr(src))


def test_def_use_assignment():
    assert def_use({a("a", "b + c")}) == DefUse(frozenset("a"), frozenset("bc"))


def test_def_use_condition_and_assignment():
    labs = {EdgeLabel.cond(lang.parse_expr("x >= y"), True), a("x", "x - y")}
    assert def_use(labs) == DefUse(frozenset("x"), frozenset("xy"))


def test_def_use_merged_parallel_edge():
    assert def_use({a("a", "1"), a("b", "1")}) == DefUse(frozenset(), frozenset())


def test_def_use_non_assign_empties_defs():
    assert def_use({a("a", "b"), EdgeLabel(BREAK)}).defs == frozenset()


def test_merged_defs_are_sound():
    # the two one-statement branches share the edge S -> T; analysing each
    # branch alone gives {a, c} and {b, c} at S, so the merged result must
    # cover their union
    g, _ = build("if c then a := 1 else b := 1 fi; x := a + b")
    assert def_use(g.labels[(1, 2)]).defs == frozenset()
    assert compute_liveness(g).at_vertex[g.s] == {"a", "b", "c"}


def test_skip_program_is_dead():
    info = compute_liveness(build("skip")[0])
    assert all(not vs for vs in info.at_vertex.values())


def test_regaloc_live_sets(regaloc):
    g, _ = regaloc
    info = compute_liveness(g)
    sets = {frozenset(vs) for vs in info.at_vertex.values()}
    assert info.at_vertex[g.s] == {"b", "c", "f"}
    for expected in ["acf", "cdf", "cdef", "bcf", "cef", "cf"]:
        assert frozenset(expected) in sets
    assert info.at_vertex[g.t] == frozenset()
    assert info.max_pressure() == 4


def test_regaloc_interference(regaloc):
    _, lts, ig = analyse(regaloc[0])
    assert ig.edges == REGALOC_EDGES
    assert all(lt.connected for lt in lts.values())


def test_regaloc_c_live_inside_loop(regaloc):
    g, _ = regaloc
    info, lts, _ = analyse(g)
    inside = {v for v, vs in info.at_vertex.items() if vs}
    assert lts["c"].vertices == inside


def test_straight_line():
    g, _ = build("a := 1; b := a")
    info = compute_liveness(g)
    # vertices 1 -a:=1-> 2 -b:=a-> 3
    assert info.at_vertex[1] == frozenset()
    assert info.at_vertex[2] == {"a"}
    assert info.at_vertex[3] == frozenset()
    assert info.at_edge[(2, 3)] == {"a"}


def test_dead_variable_has_empty_lifetime():
    lts = lifetimes(compute_liveness(build("a := 1; b := 2; c := b")[0]))
    assert lts["a"].empty and lts["a"].connected
    assert not lts["b"].empty


def test_lifetime_through_branch_is_connected():
    g, _ = build("a := 1; if c then b := a else b := a fi")
    lts = lifetimes(compute_liveness(g))
    assert lts["a"].connected
    assert lts["a"].vertices == {2}
    assert lts["a"].edges == {(2, 3)}


def test_single_variable_has_no_interference():
    _, _, ig = analyse(build("a := 1; a := a + 1")[0])
    assert not ig.edges


def test_sequence_without_overlap():
    _, lts, ig = analyse(build("a := 1; b := a; c := b")[0])
    assert not lts["a"].vertices & lts["c"].vertices
    assert not ig.interferes("a", "c")


def test_disconnected_lifetime_is_reported(caplog):
    g, _ = build("x := 1; y := x; skip; x := 2; z := x")
    with caplog.at_level("WARNING", logger="splc.liveness"):
        lts = lifetimes(compute_liveness(g))
    assert not lts["x"].connected
    assert "not connected" in caplog.text


def test_split_webs_renames_pieces():
    g, _ = build("x := 1; y := x; skip; x := 2; z := x")
    info = split_webs(compute_liveness(g))
    lts = lifetimes(info)
    assert {"x", "x#2"} <= set(lts)
    assert all(lt.connected for lt in lts.values())


def test_json_and_dot(regaloc):
    info, _, ig = analyse(regaloc[0])
    out = liveness_to_json(info, ig)
    assert set(out) == {"liveAtVertex", "interference"}
    assert len(out["interference"]) == 10
    dot = interference_to_dot(ig)
    assert dot.startswith("graph I {") and dot.count(" -- ") == 10


def test_dataflow_equations_hold(regaloc):
    g, _ = regaloc
    info = compute_liveness(g)
    du = graph_def_use(g)
    for (x, y) in g.edges:
        assert info.at_edge[(x, y)] == du[(x, y)].uses | (info.at_vertex[y] - du[(x, y)].defs)
    for v in g.vertices:
        outs = [info.at_edge[e] for e in g.edges if e[0] == v]
        assert info.at_vertex[v] == frozenset().union(*outs)


@given(programs)
def test_clique_property(ast):
    info, _, ig = analyse(cfg_of(ast)[0])
    for vs in info.at_vertex.values():
        for u in vs:
            for v in vs:
                if u != v:
                    assert ig.interferes(u, v)


@given(programs)
def test_loop_containments(ast):
    g, d = cfg_of(ast)
    live = compute_liveness(g).at_vertex
    for node in d.postorder:
        if node.kind == LOOP:
            inner = node.children[0]
            assert live[inner.b] <= live[node.t]
            assert live[inner.t] <= live[node.s]
            assert live[inner.c] <= live[node.s]


@given(programs, st.sampled_from("abcxy"))
def test_adding_a_use_never_shrinks(ast, name):
    g, _ = cfg_of(ast)
    du = graph_def_use(g)
    before = compute_liveness(g, du)
    e = sorted(g.edges)[0]
    du2 = dict(du)
    du2[e] = DefUse(du[e].defs, du[e].uses | {name})
    after = compute_liveness(g, du2)
    for v in g.vertices:
        assert before.at_vertex[v] <= after.at_vertex[v]


def test_condition_uses_are_live():
    g, _ = build("while n > 0 do n := n - 1 od")
    assert compute_liveness(g).at_vertex[g.s] == {"n"}


def test_interference_from_pairs():
    from splc.liveness import InterferenceGraph
    ig = InterferenceGraph.from_pairs("abc", [("a", "b")])
    assert ig.interferes("b", "a") and not ig.interferes("a", "c")
    assert ig.neighbours("a") == {"b"}
