import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmodp_uplink.behavior_model import (
    Action,
    ActionKind,
    Conc,
    DegenerateAction,
    DuplicateAction,
    MalformedConstraint,
    NonDet,
    Seq,
    UnknownActionRef,
    UnknownTimeEvent,
    build_behavior,
    check_all,
    check_conc,
    check_nondet,
    check_seq,
)
from rmodp_uplink.time_model import TimeSystem

import oracles

INTERNAL, INTERACTION = ActionKind.INTERNAL, ActionKind.INTERACTION


def ts_of(events, edges):
    return TimeSystem.from_edges(events, edges)


def chain_ts(n):
    ev = [f"t{i}" for i in range(1, n + 1)]
    return ts_of(ev, list(zip(ev, ev[1:])))


def split_behavior(constraint_cls, a3_kind=INTERNAL):
    # a1 ends at t2, which opens onto two branches
    ts = ts_of(
        ["t1", "t2", "t3", "t4", "t5", "t6"],
        [("t1", "t2"), ("t2", "t3"), ("t2", "t4"), ("t3", "t5"), ("t4", "t6")],
    )
    acts = [Action("a1", "t1", "t2"), Action("a2", "t3", "t5"), Action("a3", "t4", "t6", a3_kind)]
    return build_behavior(ts, acts, [constraint_cls("a1", ["a2", "a3"])])


class TestBuild:
    def test_valid(self):
        b = build_behavior(chain_ts(4), [Action("a", "t1", "t2"), Action("b", "t3", "t4")], [Seq(["a", "b"])])
        assert b.closure.precedes("t2", "t3")
        assert set(b.actions) == {"a", "b"}

    def test_degenerate(self):
        with pytest.raises(DegenerateAction):
            build_behavior(chain_ts(2), [Action("a", "t1", "t1")])
        with pytest.raises(DegenerateAction):
            build_behavior(chain_ts(2), [Action("a", "t2", "t1")])

    def test_unknown_refs(self):
        with pytest.raises(UnknownActionRef):
            build_behavior(chain_ts(2), [Action("a", "t1", "t2")], [Seq(["a", "z"])])
        with pytest.raises(UnknownTimeEvent):
            build_behavior(chain_ts(2), [Action("a", "t1", "t9")])

    def test_duplicate_action(self):
        with pytest.raises(DuplicateAction):
            build_behavior(chain_ts(4), [Action("a", "t1", "t2"), Action("a", "t3", "t4")])

    @pytest.mark.parametrize(
        "c",
        [Seq(["a", "a"]), Seq(["a"]), Conc("a", ["b"]), NonDet("a", ["b", "b"]), Conc("a", ["a", "b"])],
    )
    def test_malformed_constraints(self, c):
        acts = [Action("a", "t1", "t2"), Action("b", "t3", "t4")]
        with pytest.raises(MalformedConstraint):
            build_behavior(chain_ts(4), acts, [c])

    def test_begin_may_share_an_end_event(self):
        b = build_behavior(chain_ts(3), [Action("a", "t1", "t2"), Action("b", "t2", "t3")], [Seq(["a", "b"])])
        # b starts at the very instant a ends, which is not "after"
        assert not check_seq(b, b.constraints[0]).holds

    def test_builder_copy_is_isolated(self):
        ts = chain_ts(2)
        b = build_behavior(ts, [Action("a", "t1", "t2")])
        ts.add_event("t3")
        assert "t3" not in b.time


class TestSeq:
    def test_forward_chain_holds(self):
        b = build_behavior(chain_ts(4), [Action("a", "t1", "t2"), Action("b", "t3", "t4")], [Seq(["a", "b"])])
        assert check_seq(b, b.constraints[0]).holds

    def test_either_listed_order_holds(self):
        b = build_behavior(chain_ts(4), [Action("a", "t1", "t2"), Action("b", "t3", "t4")], [Seq(["b", "a"])])
        assert check_seq(b, b.constraints[0]).holds

    def test_disconnected_chains_violated(self):
        ts = ts_of(["t1", "t2", "u1", "u2"], [("t1", "t2"), ("u1", "u2")])
        b = build_behavior(ts, [Action("a", "t1", "t2"), Action("b", "u1", "u2")], [Seq(["a", "b"])])
        reach = oracles.reachability(sorted(b.time.events), b.time.edges())
        assert "u1" not in reach["t2"] and "t1" not in reach["u2"]
        v = check_seq(b, b.constraints[0])
        assert not v.holds and v.reason == "Unordered" and v.witnesses == ("a", "b")

    def test_overlapping_intervals_violated(self):
        b = build_behavior(chain_ts(4), [Action("a", "t1", "t3"), Action("b", "t2", "t4")], [Seq(["a", "b"])])
        assert not check_seq(b, b.constraints[0]).holds


class TestConc:
    def test_fig3_shape_holds(self):
        b = split_behavior(Conc)
        assert check_conc(b, b.constraints[0]).holds

    def test_branch_starting_early(self):
        ts = ts_of(["t1", "t2", "t3", "t4", "t5"], [("t1", "t2"), ("t2", "t3"), ("t3", "t4"), ("t4", "t5")])
        acts = [Action("a1", "t1", "t3"), Action("a2", "t4", "t5"), Action("a3", "t2", "t5")]
        b = build_behavior(ts, acts, [Conc("a1", ["a2", "a3"])])
        v = check_conc(b, b.constraints[0])
        assert not v.holds
        assert v.reason == "BranchNotAfterTrigger"
        assert v.witnesses == ("a1", "a3")

    def test_branches_may_overlap_each_other(self):
        ts = ts_of(["t1", "t2", "t3", "t4"], [("t1", "t2"), ("t2", "t3"), ("t3", "t4")])
        acts = [Action("a1", "t1", "t2"), Action("a2", "t3", "t4"), Action("a3", "t3", "t4")]
        b = build_behavior(ts, acts, [Conc("a1", ["a2", "a3"])])
        assert check_conc(b, b.constraints[0]).holds


class TestNonDet:
    def test_fig4_shape_holds(self):
        b = split_behavior(NonDet)
        assert check_nondet(b, b.constraints[0]).holds

    def test_interaction_branch(self):
        b = split_behavior(NonDet, a3_kind=INTERACTION)
        v = check_nondet(b, b.constraints[0])
        assert not v.holds and v.reason == "BranchNotInternal" and v.witnesses == ("a3",)

    def test_no_branch_reachable(self):
        ts = ts_of(["t1", "t2", "t3", "t4", "t5", "t6"], [("t1", "t2"), ("t3", "t4"), ("t5", "t6")])
        acts = [Action("a1", "t1", "t2"), Action("a2", "t3", "t4"), Action("a3", "t5", "t6")]
        b = build_behavior(ts, acts, [NonDet("a1", ["a2", "a3"])])
        reach = oracles.reachability(sorted(b.time.events), b.time.edges())
        assert not reach["t2"] & {"t3", "t5"}
        assert check_nondet(b, b.constraints[0]).reason == "NoBranchReachable"

    def test_one_reachable_branch_is_enough(self):
        ts = ts_of(["t1", "t2", "t3", "t4", "t5", "t6"], [("t1", "t2"), ("t2", "t3"), ("t3", "t4"), ("t5", "t6")])
        acts = [Action("a1", "t1", "t2"), Action("a2", "t3", "t4"), Action("a3", "t5", "t6")]
        b = build_behavior(ts, acts, [NonDet("a1", ["a2", "a3"])])
        assert check_nondet(b, b.constraints[0]).holds

    def test_interaction_trigger_allowed(self):
        ts = ts_of(["t1", "t2", "t3", "t4", "t5", "t6"], [("t1", "t2"), ("t2", "t3"), ("t2", "t4"), ("t3", "t5"), ("t4", "t6")])
        acts = [Action("a1", "t1", "t2", INTERACTION), Action("a2", "t3", "t5"), Action("a3", "t4", "t6")]
        b = build_behavior(ts, acts, [NonDet("a1", ["a2", "a3"])])
        assert check_nondet(b, b.constraints[0]).holds


class TestCheckAll:
    def test_no_constraints(self):
        b = build_behavior(chain_ts(2), [Action("a", "t1", "t2")])
        r = check_all(b)
        assert r.all_hold and r.constraints == () and r.intervals["a"].holds

    def test_mixed_report_keeps_order(self):
        ts = ts_of(
            ["t1", "t2", "t3", "t4", "t5", "t6"],
            [("t1", "t2"), ("t2", "t3"), ("t2", "t4"), ("t3", "t5"), ("t4", "t6")],
        )
        acts = [Action("a1", "t1", "t2"), Action("a2", "t3", "t5"), Action("a3", "t4", "t6", INTERACTION)]
        b = build_behavior(ts, acts, [Seq(["a1", "a2"]), NonDet("a1", ["a2", "a3"])])
        r = check_all(b)
        assert [v.holds for v in r.verdicts()] == [True, False]
        assert r.verdicts()[1].reason == "BranchNotInternal"
        assert not r.all_hold
        d = r.to_dict()
        assert [c["type"] for c in d["constraints"]] == ["seq", "nondet"]

    def test_fig2b_choice(self):
        # x then a choice between a and b
        ts = ts_of(["t1", "t2", "t3", "t4", "t5", "t6"], [("t1", "t2"), ("t2", "t3"), ("t3", "t4"), ("t2", "t5"), ("t5", "t6")])
        acts = [Action("x", "t1", "t2"), Action("a", "t3", "t4"), Action("b", "t5", "t6")]
        b = build_behavior(ts, acts, [NonDet("x", ["a", "b"]), Seq(["a", "b"])])
        reach = oracles.reachability(sorted(ts.events), ts.edges())
        assert "t5" not in reach["t4"] and "t3" not in reach["t6"]
        assert [v.holds for v in check_all(b).verdicts()] == [True, False]


# --- properties -----------------------------------------------------------


def random_behavior(rng, n_events=8, n_actions=5, p=0.4):
    events, edges = oracles.random_dag(rng, n_events, p=p)
    reach = oracles.reachability(events, edges)
    spans = [(a, b) for a in events for b in sorted(reach[a])]
    if len(spans) < 3:
        return None
    acts = []
    for i in range(min(n_actions, len(spans))):
        a, e = spans[int(rng.integers(len(spans)))]
        kind = INTERNAL if rng.random() < 0.8 else INTERACTION
        acts.append(Action(f"x{i}", a, e, kind))
    ids = [a.id for a in acts]
    cons = []
    for _ in range(3):
        picked = list(rng.choice(ids, size=3, replace=False))
        cls = [Seq, Conc, NonDet][int(rng.integers(3))]
        cons.append(Seq(picked) if cls is Seq else cls(picked[0], picked[1:]))
    return build_behavior(ts_of(events, edges), acts, cons), reach


def rename(b, f):
    ts = TimeSystem.from_edges([f(e) for e in b.time.events], [(f(x), f(y)) for x, y in b.time.edges()])
    acts = [Action(f(a.id), f(a.instant_begin), f(a.instant_end), a.kind) for a in b.actions.values()]
    cons = []
    for c in b.constraints:
        cons.append(Seq([f(m) for m in c.members]) if isinstance(c, Seq) else type(c)(f(c.trigger), [f(x) for x in c.branches]))
    return build_behavior(ts, acts, cons)


def test_verdicts_are_pure_and_rename_invariant():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 150:
        got = random_behavior(rng)
        if got is None:
            continue
        b, _ = got
        first = check_all(b).to_dict()
        assert check_all(b).to_dict() == first
        renamed = rename(b, lambda s: "r_" + s[::-1])
        assert [v.holds for v in check_all(renamed).verdicts()] == [v.holds for v in check_all(b).verdicts()]
        assert [v.reason for v in check_all(renamed).verdicts()] == [v.reason for v in check_all(b).verdicts()]
        checked += 1


def seq_instance(rng):
    """Random time DAG plus actions; half the time the actions tile a path so Seq can hold."""
    n = int(rng.integers(6, 11))
    events, edges = oracles.random_dag(rng, n, p=0.25)
    reach = oracles.reachability(events, edges)
    k = int(rng.integers(2, 6))
    if rng.random() < 0.5:
        path = sorted(events, key=lambda e: -len(reach[e]))
        # make the sorted order a path so consecutive slots are ordered
        edges = sorted(set(edges) | set(zip(path, path[1:])))
        reach = oracles.reachability(events, edges)
        cuts = sorted(rng.choice(n, size=2 * k, replace=False)) if 2 * k <= n else None
        if cuts is not None:
            spans = [(path[cuts[2 * i]], path[cuts[2 * i + 1]]) for i in range(k)]
            rng.shuffle(spans)
        else:
            spans = None
    else:
        spans = None
    if spans is None:
        pairs = [(a, e) for a in events for e in sorted(reach[a])]
        if not pairs:
            return None
        spans = [pairs[int(rng.integers(len(pairs)))] for _ in range(k)]
    acts = [Action(f"x{i}", a, e) for i, (a, e) in enumerate(spans)]
    return build_behavior(ts_of(events, edges), acts), reach


def test_seq_matches_permutation_oracle():
    rng = np.random.default_rng(3)
    seen = {True: 0, False: 0}
    for _ in range(600):
        got = seq_instance(rng)
        if got is None:
            continue
        b, reach = got
        members = list(b.actions)
        k = len(members)

        def before(x, y):
            return b.actions[y].instant_begin in reach[b.actions[x].instant_end]

        expected = any(
            all(before(p[i], p[j]) for i in range(k) for j in range(i + 1, k))
            for p in itertools.permutations(members)
        )
        assert check_seq(b, Seq(members)).holds == expected
        seen[expected] += 1
    assert seen[True] > 50 and seen[False] > 50


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6))
def test_tiled_chain_seq_holds(n):
    ts = chain_ts(2 * n)
    acts = [Action(f"a{i}", f"t{2 * i + 1}", f"t{2 * i + 2}") for i in range(n)]
    cons = [Seq([f"a{i}", f"a{i + 1}"]) for i in range(n - 1)]
    assert check_all(build_behavior(ts, acts, cons)).all_hold


def conc_implies_nondet_trials(n_trials, seed):
    """Run random all-internal instances; return (trials, conc_holds_count, counterexamples)."""
    rng = np.random.default_rng(seed)
    trials = holds = 0
    bad = []
    while trials < n_trials:
        events, edges = oracles.random_dag(rng, int(rng.integers(4, 9)), p=0.45)
        reach = oracles.reachability(events, edges)
        spans = [(a, e) for a in events for e in sorted(reach[a])]
        k = int(rng.integers(3, 6))
        if len(spans) < k:
            continue
        # half the time the trigger has successors and the branches start after it, so Conc can hold
        biased = rng.random() < 0.5
        starts = {a for a, _ in spans}
        openers = [sp for sp in spans if reach[sp[1]] & starts] if biased else spans
        if not openers:
            continue
        trigger = Action("x0", *openers[int(rng.integers(len(openers)))])
        later = [sp for sp in spans if sp[0] in reach[trigger.instant_end]]
        pool = later if biased and later else spans
        acts = [trigger] + [Action(f"x{i}", *pool[int(rng.integers(len(pool)))]) for i in range(1, k)]
        ts = ts_of(events, edges)
        branches = [a.id for a in acts[1:]]
        b = build_behavior(ts, acts, [Conc("x0", branches), NonDet("x0", branches)])
        c, nd = check_conc(b, b.constraints[0]), check_nondet(b, b.constraints[1])
        trials += 1
        if c.holds:
            holds += 1
            if not nd.holds:
                bad.append(b)
    return trials, holds, bad


def test_conc_implies_nondet():
    trials, holds, bad = conc_implies_nondet_trials(300, seed=5)
    assert holds > 0
    assert bad == []
