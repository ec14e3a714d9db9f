"""Behavior graphs (fork/choice automata) and trace conformance against a behavior."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .behavior_model import (
    Action,
    ActionKind,
    Behavior,
    Conc,
    Constraint,
    NonDet,
    Seq,
    build_behavior,
)
from .time_model import TimeSystem


class ConformanceError(Exception):
    pass


class MissingSplitKind(ConformanceError):
    pass


class MalformedGraph(ConformanceError):
    pass


class CyclicGraph(ConformanceError):
    pass


class UnknownAction(ConformanceError):
    pass


class MalformedTrace(ConformanceError):
    pass


class SplitKind(enum.Enum):
    FORK = "fork"
    CHOICE = "choice"


@dataclass(frozen=True)
class Transition:
    src: str
    action: str
    dst: str


@dataclass(frozen=True)
class BehaviorGraph:
    states: tuple[str, ...]
    initial: str
    transitions: tuple[Transition, ...]
    split_kinds: Mapping[str, SplitKind] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "split_kinds", dict(self.split_kinds))
        known = set(self.states)
        if len(known) != len(self.states):
            raise MalformedGraph("duplicate state ids")
        if self.initial not in known:
            raise MalformedGraph(f"initial state {self.initial!r} is not a state")
        labels = set()
        for t in self.transitions:
            for s in (t.src, t.dst):
                if s not in known:
                    raise MalformedGraph(f"transition {t.action!r} touches unknown state {s!r}")
            if t.action in labels:
                raise MalformedGraph(f"action {t.action!r} labels more than one transition")
            labels.add(t.action)
        for s in self.split_kinds:
            if s not in known:
                raise MalformedGraph(f"split kind given for unknown state {s!r}")
        for s in self.states:
            if len(self.outgoing(s)) >= 2 and s not in self.split_kinds:
                raise MissingSplitKind(f"state {s!r} has several outgoing transitions but no split kind")

    def outgoing(self, state: str) -> list[Transition]:
        return [t for t in self.transitions if t.src == state]

    def is_acyclic(self) -> bool:
        succ = defaultdict(set)
        for t in self.transitions:
            succ[t.src].add(t.dst)
        state = {s: 0 for s in self.states}  # 0 new, 1 on stack, 2 done

        def visit(s: str) -> bool:
            state[s] = 1
            for n in succ[s]:
                if state[n] == 1 or (state[n] == 0 and not visit(n)):
                    return False
            state[s] = 2
            return True

        return all(state[s] == 2 or visit(s) for s in self.states)


def _kind(kinds: Mapping[str, ActionKind], action: str) -> ActionKind:
    return kinds.get(action, ActionKind.INTERNAL)


def classify_graph(g: BehaviorGraph, kinds: Mapping[str, ActionKind] | None = None) -> list[Constraint]:
    """Read constraints off the graph shape.

    For each transition ``x`` into state ``s``: a single outgoing ``y`` gives
    ``Seq(x, y)``; a fork gives ``Conc(x, outgoing)``; a choice whose outgoing
    actions are all internal gives ``NonDet(x, outgoing)``.  A choice with an
    interaction among its branches is left to the environment and yields nothing.
    """
    kinds = kinds or {}
    out: list[Constraint] = []
    for x in g.transitions:
        succ = g.outgoing(x.dst)
        if len(succ) == 1:
            c: Constraint | None = Seq((x.action, succ[0].action))
        elif len(succ) >= 2:
            branches = [t.action for t in succ]
            if g.split_kinds[x.dst] is SplitKind.FORK:
                c = Conc(x.action, branches)
            elif all(_kind(kinds, a) is ActionKind.INTERNAL for a in branches):
                c = NonDet(x.action, branches)
            else:
                c = None
        else:
            c = None
        if c is not None and c not in out:
            out.append(c)
    return out


def state_event(state: str) -> str:
    return f"state:{state}"


def graph_to_behavior(g: BehaviorGraph, kinds: Mapping[str, ActionKind] | None = None) -> Behavior:
    """Lay the graph out on a time system and attach its classified constraints.

    Every state gets one time event; every transition ``s --a--> s'`` gets a
    begin and an end event chained as ``s -> begin:a -> end:a -> s'``.
    """
    if not g.is_acyclic():
        raise CyclicGraph("looping behavior graphs cannot be laid out on acyclic time")
    kinds = kinds or {}
    ts = TimeSystem()
    for s in g.states:
        ts.add_event(state_event(s))
    actions = []
    for t in g.transitions:
        begin, end = f"begin:{t.action}", f"end:{t.action}"
        ts.add_event(begin).add_event(end)
        ts.link_next(state_event(t.src), begin)
        ts.link_next(begin, end)
        ts.link_next(end, state_event(t.dst))
        actions.append(Action(t.action, begin, end, _kind(kinds, t.action)))
    return build_behavior(ts, actions, classify_graph(g, kinds))


@dataclass(frozen=True)
class TraceEvent:
    ev: str
    action: str

    def __post_init__(self) -> None:
        if self.ev not in ("begin", "end"):
            raise MalformedTrace(f"event kind must be 'begin' or 'end', got {self.ev!r}")


def Begin(action: str) -> TraceEvent:
    return TraceEvent("begin", action)


def End(action: str) -> TraceEvent:
    return TraceEvent("end", action)


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    constraint_index: int | None = None
    reason: str | None = None
    position: int | None = None

    def to_dict(self) -> dict:
        if self.accepted:
            return {"verdict": "accepted"}
        return {
            "verdict": "rejected",
            "constraint_index": self.constraint_index,
            "reason": self.reason,
            "position": self.position,
        }


ACCEPTED = Verdict(True)


def _positions(b: Behavior, trace: Iterable[TraceEvent]) -> tuple[dict[str, int], dict[str, int], int]:
    begins: dict[str, int] = {}
    ends: dict[str, int] = {}
    n = 0
    for pos, e in enumerate(trace):
        n = pos + 1
        if e.action not in b.actions:
            raise UnknownAction(f"trace position {pos}: unknown action {e.action!r}")
        if e.ev == "begin":
            if e.action in begins:
                raise MalformedTrace(f"trace position {pos}: action {e.action!r} begins twice")
            begins[e.action] = pos
        else:
            if e.action not in begins:
                raise MalformedTrace(f"trace position {pos}: action {e.action!r} ends before it begins")
            if e.action in ends:
                raise MalformedTrace(f"trace position {pos}: action {e.action!r} ends twice")
            ends[e.action] = pos
    unfinished = sorted(set(begins) - set(ends))
    if unfinished:
        raise MalformedTrace(f"actions never end: {unfinished}")
    return begins, ends, n


def check_trace(b: Behavior, trace: Iterable[TraceEvent]) -> Verdict:
    """Check an observed single-occurrence trace against ``b``'s constraints.

    Seq members that occur must occur in their listed order, without overlap.
    A Conc trigger that occurs needs every branch to occur after it ends; a
    NonDet trigger needs exactly one branch after it ends.  The violation
    found earliest in the trace is reported (ties go to the lower constraint
    index).
    """
    begins, ends, length = _positions(b, trace)
    found: list[tuple[int, int, str]] = []
    for idx, c in enumerate(b.constraints):
        v = _trace_violation(c, begins, ends, length)
        if v is not None:
            found.append((v[0], idx, v[1]))
    if not found:
        return ACCEPTED
    pos, idx, reason = min(found)
    return Verdict(False, idx, reason, pos)


def _trace_violation(
    c: Constraint, begins: dict[str, int], ends: dict[str, int], length: int
) -> tuple[int, str] | None:
    if isinstance(c, Seq):
        present = [a for a in c.members if a in begins]
        worst = None
        for i, x in enumerate(present):
            for y in present[i + 1 :]:
                if begins[y] < ends[x]:
                    hit = (begins[y], f"{y!r} begins before {x!r} ends")
                    worst = hit if worst is None or hit < worst else worst
        return worst
    trig = c.trigger
    if trig not in begins:
        return None
    taken = sorted((begins[x], x) for x in c.branches if x in begins)
    early = [(p, x) for p, x in taken if p < ends[trig]]
    if early:
        p, x = early[0]
        return p, f"branch {x!r} begins before trigger {trig!r} ends"
    if isinstance(c, Conc):
        missing = [x for x in c.branches if x not in begins]
        if missing:
            return length, f"concurrent branches never taken: {missing}"
        return None
    if not taken:
        return length, "no branch taken"
    if len(taken) > 1:
        return taken[1][0], f"both branches taken: {[x for _, x in taken]}"
    return None


def executions(g: BehaviorGraph) -> list[frozenset[str]]:
    """Action sets of the complete runs of ``g``: forks take all branches, choices one."""
    runs: set[frozenset[str]] = set()

    def step(frontier: frozenset[str], reached: frozenset[str], taken: frozenset[str]) -> None:
        pending = sorted(frontier)
        if not pending:
            runs.add(taken)
            return
        s, rest = pending[0], frozenset(pending[1:])
        out = g.outgoing(s)
        if len(out) >= 2 and g.split_kinds[s] is SplitKind.CHOICE:
            options = [[t] for t in out]
        else:
            options = [out]
        for chosen in options:
            new = {t.dst for t in chosen} - reached
            step(rest | new, reached | new, taken | {t.action for t in chosen})

    step(frozenset({g.initial}), frozenset({g.initial}), frozenset())
    return sorted(runs, key=sorted)


def run_order(g: BehaviorGraph, run: frozenset[str]) -> set[tuple[TraceEvent, TraceEvent]]:
    """Precedence pairs a trace of ``run`` must respect."""
    order = set()
    for t in g.transitions:
        if t.action not in run:
            continue
        order.add((Begin(t.action), End(t.action)))
        for u in g.outgoing(t.dst):
            if u.action in run:
                order.add((End(t.action), Begin(u.action)))
    return order


def linearizations(events: list[TraceEvent], order: set[tuple[TraceEvent, TraceEvent]]):
    """Yield every sequence of ``events`` consistent with the precedence pairs."""
    preds = {e: {a for a, b in order if b == e} for e in events}

    def go(prefix: list[TraceEvent], placed: set[TraceEvent]):
        if len(prefix) == len(events):
            yield list(prefix)
            return
        for e in events:
            if e not in placed and preds[e] <= placed:
                prefix.append(e)
                placed.add(e)
                yield from go(prefix, placed)
                prefix.pop()
                placed.discard(e)

    yield from go([], set())


def executor_traces(g: BehaviorGraph) -> list[list[TraceEvent]]:
    """All traces a small-step execution of ``g`` can produce."""
    out = []
    for run in executions(g):
        events = [e for a in sorted(run) for e in (Begin(a), End(a))]
        out.extend(linearizations(events, run_order(g, run)))
    return out
