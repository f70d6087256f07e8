from __future__ import annotations

import csv
import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popproto.analysis import (ILL, INCONCLUSIVE, ExplorationLimitError, InvalidQ1Error,
                               ReportEntry, VerificationReport, check_1aware, coverable,
                               decide, decide_output, explore, strongly_connected_components,
                               terminal_sccs, verify_predicate)
from popproto.constructions import flock_binary, flock_standard, linear_inequality, majority_leaders
from popproto.core import Multiset, Protocol, Transition, initial_configuration

from oracles import canon, protocol_decide, protocol_reachable


def rename(p: Protocol, f) -> Protocol:
    return Protocol(tuple(f(q) for q in p.states),
                    tuple(Transition(tuple(map(f, t.pre)), tuple(map(f, t.post))) for t in p.transitions),
                    frozenset(map(f, p.initial)), Multiset({f(q): v for q, v in p.leaders.items()}),
                    {f(q): v for q, v in p.output.items()})


class TestExplore:
    def test_example_reaches_all_two(self):
        p = flock_standard(2)
        g = explore(p, Multiset({"1": 3}))
        assert g.node_of(Multiset({"2": 3})) is not None
        assert all(sum(c) == 3 for c in g.nodes)

    def test_single_agent(self):
        g = explore(flock_standard(3), Multiset({"1": 1}))
        assert len(g) == 1

    @pytest.mark.parametrize("x", [2, 3, 5, 7])
    def test_node_count_matches_oracle(self, x):
        p = flock_binary(3)
        c0 = Multiset({"1": x})
        assert len(explore(p, c0)) == len(protocol_reachable(p, c0))

    def test_edges_match_oracle(self):
        p = linear_inequality([1, -1], 0)
        c0 = initial_configuration(p, {"x1": 2, "x2": 1})
        g = explore(p, c0)
        ref = protocol_reachable(p, c0)
        assert {canon(g.configuration(v)) for v in range(len(g))} == set(ref)
        for v in range(len(g)):
            mine = {canon(g.configuration(w)) for w in g.succ[v]}
            assert mine == ref[canon(g.configuration(v))]

    def test_limit_raises_with_partial_graph(self):
        p = flock_standard(5)
        with pytest.raises(ExplorationLimitError) as info:
            explore(p, Multiset({"1": 9}), node_limit=10)
        assert info.value.partial is not None
        assert 0 < len(info.value.partial) <= 11

    def test_path_to_replays(self):
        p = flock_standard(3)
        g = explore(p, Multiset({"1": 4}))
        v = g.node_of(Multiset({"3": 4}))
        c = g.root
        for step in g.path_to(v):
            c = (c - step.prem) + step.postm
        assert c == Multiset({"3": 4})


class TestSCC:
    def test_long_chain_is_iterative(self):
        n = 200_000
        succ = [[i + 1] for i in range(n - 1)] + [[]]
        comps, comp_of = strongly_connected_components(succ)
        assert len(comps) == n
        assert len(set(comp_of)) == n

    def test_cycle_plus_tail(self):
        succ = [[1], [2], [0, 3], [4], [3]]
        comps, comp_of = strongly_connected_components(succ)
        assert comp_of[0] == comp_of[1] == comp_of[2]
        assert comp_of[3] == comp_of[4] != comp_of[0]


class TestDecide:
    def test_example_fair_output_one(self):
        assert decide_output(flock_standard(2), Multiset({"1": 3})) == 1

    def test_single_agent_zero(self):
        assert decide_output(flock_standard(2), Multiset({"1": 1})) == 0

    def test_majority_with_leaders(self):
        p = majority_leaders(2)
        assert decide_output(p, initial_configuration(p, {"x": 3})) == 1

    def test_ill_specified(self):
        # a, a -> b, b and b, b -> a, a with mixed outputs never settles
        p = Protocol(("a", "b"), (Transition(("a", "a"), ("b", "b")),
                                  Transition(("b", "b"), ("a", "a"))),
                     frozenset({"a"}), Multiset(), {"b": 1})
        assert decide_output(p, Multiset({"a": 2})) is None
        d = decide(explore(p, Multiset({"a": 2})), expected=1)
        assert d.witness is not None

    def test_order_invariance(self):
        p = flock_binary(6)
        q = rename(p, lambda s: f"z{999 - int(s):04d}")
        for x in range(1, 9):
            c0 = initial_configuration(p, {"1": x})
            c1 = initial_configuration(q, {"z0998": x})
            assert decide_output(p, c0) == decide_output(q, c1)

    @pytest.mark.parametrize("x", [2, 4, 5])
    def test_terminal_nodes_agree_with_root(self, x):
        p = flock_standard(4)
        g = explore(p, Multiset({"1": x}))
        root = decide(g).output
        assert root is not None
        for comp in terminal_sccs(g):
            for v in comp:
                assert decide_output(p, g.configuration(v)) == root

    def test_monotone_for_flock(self):
        for p in (flock_standard(5), flock_binary(5)):
            outs = [decide_output(p, Multiset({"1": x})) for x in range(1, 11)]
            first = outs.index(1)
            assert all(o == 1 for o in outs[first:])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.tuples(st.sampled_from("abc"), st.sampled_from("abc")),
                              st.tuples(st.sampled_from("abc"), st.sampled_from("abc"))),
                    max_size=5),
           st.sets(st.sampled_from("abc")), st.integers(1, 4))
    def test_matches_oracle_on_random_protocols(self, ts, ones, size):
        p = Protocol(("a", "b", "c"), tuple(Transition(a, b) for a, b in ts),
                     frozenset({"a"}), Multiset(), {q: 1 for q in ones})
        c0 = Multiset({"a": size})
        assert decide_output(p, c0) == protocol_decide(p, c0)


class TestVerify:
    def test_binary_three(self):
        p = flock_binary(3)
        rep = verify_predicate(p, lambda d: d["1"] >= 3, [{"1": x} for x in range(1, 7)])
        assert [e.decided for e in rep.entries] == [0, 0, 1, 1, 1, 1]
        assert rep.verdict == "pass"

    def test_standard_one(self):
        p = flock_standard(1)
        rep = verify_predicate(p, lambda d: True, [{"1": x} for x in range(1, 5)])
        assert [e.decided for e in rep.entries] == [1, 1, 1, 1]

    def test_linear_difference(self):
        p = linear_inequality([1, -1], 0)
        dom = [{"x1": x, "x2": y} for x in range(4) for y in range(4) if x or y]
        rep = verify_predicate(p, lambda d: d["x1"] > d["x2"], dom)
        assert rep.verdict == "pass"
        assert not any(e.decided == ILL for e in rep.entries)

    def test_wrong_predicate_fails_with_counterexample(self):
        p = flock_binary(3)
        rep = verify_predicate(p, lambda d: d["1"] >= 4, [{"1": x} for x in range(1, 7)])
        assert rep.verdict == "fail"
        (bad,) = rep.failures
        assert bad.inputs == {"1": 3}
        assert bad.counterexample

    def test_limit_is_inconclusive(self):
        p = flock_standard(6)
        rep = verify_predicate(p, lambda d: d["1"] >= 6, [{"1": 2}, {"1": 12}], node_limit=20)
        assert rep.verdict == INCONCLUSIVE
        assert rep.entries[0].decided == 0

    def test_fail_beats_inconclusive(self):
        rep = VerificationReport([ReportEntry({"x": 1}, 1, INCONCLUSIVE, 5, 0),
                                  ReportEntry({"x": 2}, 1, 0, 3, 1)])
        assert rep.verdict == "fail"

    def test_empty_domain(self):
        with pytest.raises(ValueError):
            verify_predicate(flock_standard(2), lambda d: True, [])

    def test_serialisations(self):
        p = flock_binary(3)
        rep = verify_predicate(p, lambda d: d["1"] >= 3, [{"1": x} for x in range(1, 4)])
        doc = json.loads(rep.to_json())
        assert doc["verdict"] == "pass" and len(doc["entries"]) == 3
        rows = list(csv.reader(io.StringIO(rep.to_csv())))
        assert rows[0] == ["input", "expected", "decided", "nodes", "terminal_sccs"]
        assert rows[3][:3] == ["1=3", "1", "1"]


class TestCoverable:
    def test_reaches_threshold(self):
        assert coverable(flock_standard(3), Multiset({"1": 3}), {"3"})

    def test_two_agents_cannot(self):
        assert not coverable(flock_standard(3), Multiset({"1": 2}), {"3"})

    def test_matches_oracle(self):
        p = flock_binary(6)
        for x in range(1, 8):
            c0 = Multiset({"1": x})
            ref = any(dict(c).get("6", 0) for c in protocol_reachable(p, c0))
            assert coverable(p, c0, {"6"}) == ref


class TestOneAware:
    def test_standard_protocol(self):
        res = check_1aware(flock_standard(2), {"2"}, [{"1": x} for x in range(1, 6)])
        assert res.aware and res.coverability_agrees

    def test_zero_state_is_not_q1(self):
        assert not check_1aware(flock_standard(2), {"0"}, [{"1": x} for x in range(1, 4)])

    def test_empty_q1(self):
        assert not check_1aware(flock_standard(2), set(), [{"1": 3}])

    def test_q1_must_avoid_initial(self):
        with pytest.raises(InvalidQ1Error):
            check_1aware(flock_standard(2), {"1"}, [{"1": 3}])
