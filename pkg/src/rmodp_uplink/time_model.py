"""Time coordinate system: time events ordered by a "closest following" relation.

A :class:`TimeSystem` holds a set of abstract time events and, for each of
them, the set of events that immediately follow it.  Its transitive closure
(:class:`ClosureView`) answers ordering questions.  Events carry no metric
value; two events are either ordered one way, the other way, or unrelated.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping


class TimeModelError(Exception):
    pass


class DuplicateEvent(TimeModelError):
    def __init__(self, event_id: str):
        super().__init__(f"time event {event_id!r} already exists")
        self.event_id = event_id


class UnknownEvent(TimeModelError):
    def __init__(self, event_id: str):
        super().__init__(f"unknown time event {event_id!r}")
        self.event_id = event_id


class SelfLoop(TimeModelError):
    def __init__(self, event_id: str):
        super().__init__(f"time event {event_id!r} cannot follow itself")
        self.event_id = event_id


class CycleIntroduced(TimeModelError):
    def __init__(self, src: str, dst: str):
        super().__init__(f"linking {src!r} -> {dst!r} would make time cyclic")
        self.src = src
        self.dst = dst


class CycleDetected(TimeModelError):
    def __init__(self, events: Iterable[str]):
        self.events = tuple(sorted(events))
        super().__init__(f"time events on a cycle: {', '.join(self.events)}")


class TimeSystem:
    """Mutable builder for a set of time events and their nextTE links.

    Links are checked as they are added, so a system built through
    :meth:`add_event` / :meth:`link_next` is always acyclic.  Systems read
    from untrusted input go through :meth:`from_edges` instead, which stores
    the edges verbatim so that :func:`check_time_invariants` can report what
    is wrong with them.
    """

    def __init__(self) -> None:
        self._next: dict[str, set[str]] = {}

    @classmethod
    def from_edges(
        cls, events: Iterable[str], edges: Iterable[tuple[str, str]], *, validate: bool = True
    ) -> TimeSystem:
        ts = cls()
        for ev in events:
            ts.add_event(ev)
        for src, dst in edges:
            if validate:
                ts.link_next(src, dst)
            else:
                ts._next.setdefault(src, set()).add(dst)
        return ts

    @property
    def events(self) -> frozenset[str]:
        return frozenset(self._next)

    def __contains__(self, event_id: object) -> bool:
        return event_id in self._next

    def __len__(self) -> int:
        return len(self._next)

    def next(self, event_id: str) -> frozenset[str]:
        if event_id not in self._next:
            raise UnknownEvent(event_id)
        return frozenset(self._next[event_id])

    def edges(self) -> list[tuple[str, str]]:
        return sorted((src, dst) for src, dsts in self._next.items() for dst in dsts)

    def add_event(self, event_id: str) -> TimeSystem:
        if not isinstance(event_id, str) or not event_id:
            raise ValueError("time event ids must be nonempty strings")
        if event_id in self._next:
            raise DuplicateEvent(event_id)
        self._next[event_id] = set()
        return self

    def link_next(self, src: str, dst: str) -> TimeSystem:
        for ev in (src, dst):
            if ev not in self._next:
                raise UnknownEvent(ev)
        if src == dst:
            raise SelfLoop(src)
        if src in _reachable(self._next, dst, include_start=True):
            raise CycleIntroduced(src, dst)
        self._next[src].add(dst)
        return self

    def copy(self) -> TimeSystem:
        ts = TimeSystem()
        ts._next = {ev: set(dsts) for ev, dsts in self._next.items()}
        return ts

    def __repr__(self) -> str:
        return f"TimeSystem(events={len(self._next)}, edges={len(self.edges())})"


def _reachable(graph: Mapping[str, Iterable[str]], start: str, *, include_start: bool) -> set[str]:
    seen = {start} if include_start else set()
    stack = [start]
    while stack:
        for nxt in graph.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


@dataclass(frozen=True)
class ClosureView:
    """Immutable snapshot of a time system together with its followingTE relation."""

    next: Mapping[str, frozenset[str]]
    following: Mapping[str, frozenset[str]]

    @property
    def events(self) -> frozenset[str]:
        return frozenset(self.following)

    def precedes(self, a: str, b: str) -> bool:
        """True iff ``b`` lies in the closure of ``a`` (a is strictly earlier)."""
        for ev in (a, b):
            if ev not in self.following:
                raise UnknownEvent(ev)
        return b in self.following[a]

    def related(self, a: str, b: str) -> bool:
        return self.precedes(a, b) or self.precedes(b, a)


def compute_closure(ts: TimeSystem) -> ClosureView:
    """Transitive closure of nextTE, computed in reverse topological order.

    Raises :class:`CycleDetected` when handed a cyclic system (possible only
    for systems built with ``from_edges(..., validate=False)``).
    """
    nxt = {ev: frozenset(dsts) for ev, dsts in ts._next.items()}
    for ev, dsts in nxt.items():
        for dst in dsts:
            if dst not in nxt:
                raise UnknownEvent(dst)

    indegree = {ev: 0 for ev in nxt}
    for dsts in nxt.values():
        for dst in dsts:
            indegree[dst] += 1
    queue = deque(sorted(ev for ev, d in indegree.items() if d == 0))
    order: list[str] = []
    while queue:
        ev = queue.popleft()
        order.append(ev)
        for dst in sorted(nxt[ev]):
            indegree[dst] -= 1
            if indegree[dst] == 0:
                queue.append(dst)
    if len(order) != len(nxt):
        raise CycleDetected(ev for ev in nxt if ev not in set(order))

    following: dict[str, frozenset[str]] = {}
    for ev in reversed(order):
        acc: set[str] = set(nxt[ev])
        for dst in nxt[ev]:
            acc |= following[dst]
        following[ev] = frozenset(acc)
    return ClosureView(next=nxt, following=following)


@dataclass(frozen=True)
class InvariantViolation:
    rule: str
    events: tuple[str, ...]
    message: str

    def to_dict(self) -> dict:
        return {"rule": self.rule, "events": list(self.events), "message": self.message}


@dataclass(frozen=True)
class InvariantReport:
    violations: tuple[InvariantViolation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def check_time_invariants(ts: TimeSystem) -> InvariantReport:
    """Evaluate the well-formedness rules of a time system, returning violations as data.

    Rules checked, in order:

    * ``dangling target``: a next-edge points to an undeclared event;
    * ``self loop``: an event is in its own next set;
    * ``acyclicity``: some event lies in its own following set;
    * ``empty next``, ``leaf next``, ``closure`` : the three clauses of the
      closure invariant, evaluated per event against the computed closure
      (only when the system is acyclic, since otherwise no closure exists).
    """
    violations: list[InvariantViolation] = []
    graph = {ev: set(dsts) for ev, dsts in ts._next.items()}

    for ev in sorted(graph):
        for dst in sorted(graph[ev]):
            if dst not in graph:
                violations.append(
                    InvariantViolation("dangling target", (ev, dst), f"{ev} -> {dst}: {dst} is not declared")
                )
    clean = {ev: {d for d in dsts if d in graph} for ev, dsts in graph.items()}

    for ev in sorted(clean):
        if ev in clean[ev]:
            violations.append(InvariantViolation("self loop", (ev,), f"{ev} is in its own next set"))

    cyclic = sorted(ev for ev in clean if ev in _reachable(clean, ev, include_start=False))
    if cyclic:
        violations.append(
            InvariantViolation("acyclicity", tuple(cyclic), "events lie in their own following set")
        )
        return InvariantReport(tuple(violations))

    acyclic = TimeSystem()
    acyclic._next = clean
    cv = compute_closure(acyclic)
    for ev in sorted(clean):
        nxt, fol = cv.next[ev], cv.following[ev]
        if not nxt and fol:
            violations.append(InvariantViolation("empty next", (ev,), f"{ev} has no next but a following set"))
        elif nxt and not any(cv.following[u] for u in nxt) and fol != nxt:
            violations.append(InvariantViolation("leaf next", (ev,), f"following({ev}) must equal next({ev})"))
        elif nxt:
            needed = set(nxt).union(*(cv.following[u] for u in nxt))
            if not needed <= fol:
                violations.append(
                    InvariantViolation("closure", (ev,), f"following({ev}) misses {sorted(needed - fol)}")
                )
    return InvariantReport(tuple(violations))
