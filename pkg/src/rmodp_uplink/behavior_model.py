"""Actions, behaviors and the sequentiality / concurrency / non-determinism checkers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Union

from .time_model import (
    ClosureView,
    InvariantReport,
    TimeSystem,
    check_time_invariants,
    compute_closure,
)


class ActionKind(enum.Enum):
    INTERNAL = "internal"
    INTERACTION = "interaction"


class BehaviorError(Exception):
    pass


class DuplicateAction(BehaviorError):
    pass


class UnknownTimeEvent(BehaviorError):
    pass


class UnknownActionRef(BehaviorError):
    pass


class DegenerateAction(BehaviorError):
    pass


class MalformedConstraint(BehaviorError):
    pass


@dataclass(frozen=True)
class Action:
    id: str
    instant_begin: str
    instant_end: str
    kind: ActionKind = ActionKind.INTERNAL


@dataclass(frozen=True)
class Seq:
    members: tuple[str, ...]

    def __init__(self, members: Iterable[str]):
        object.__setattr__(self, "members", tuple(members))

    @property
    def action_ids(self) -> tuple[str, ...]:
        return self.members


@dataclass(frozen=True)
class _Split:
    trigger: str
    branches: tuple[str, ...]

    def __init__(self, trigger: str, branches: Iterable[str]):
        object.__setattr__(self, "trigger", trigger)
        object.__setattr__(self, "branches", tuple(branches))

    @property
    def action_ids(self) -> tuple[str, ...]:
        return (self.trigger, *self.branches)


class Conc(_Split):
    """Every branch starts after the trigger has ended (fork)."""


class NonDet(_Split):
    """Internal branches, at least one reachable after the trigger (choice)."""


Constraint = Union[Seq, Conc, NonDet]


def constraint_tag(c: Constraint) -> str:
    return {Seq: "seq", Conc: "conc", NonDet: "nondet"}[type(c)]


@dataclass(frozen=True)
class Behavior:
    time: TimeSystem
    closure: ClosureView
    actions: dict[str, Action]
    constraints: tuple[Constraint, ...]

    def action(self, action_id: str) -> Action:
        try:
            return self.actions[action_id]
        except KeyError:
            raise UnknownActionRef(f"unknown action {action_id!r}") from None

    def before(self, x: str, y: str) -> bool:
        """Action ``x`` finishes before action ``y`` starts."""
        return self.closure.precedes(self.action(x).instant_end, self.action(y).instant_begin)


def _validate_constraint(c: Constraint, actions: dict[str, Action]) -> None:
    for aid in c.action_ids:
        if aid not in actions:
            raise UnknownActionRef(f"{constraint_tag(c)} constraint references unknown action {aid!r}")
    if isinstance(c, Seq):
        if len(c.members) < 2:
            raise MalformedConstraint("a seq constraint needs at least two actions")
        if len(set(c.members)) != len(c.members):
            raise MalformedConstraint(f"seq constraint repeats an action: {list(c.members)}")
    elif isinstance(c, (Conc, NonDet)):
        if len(c.branches) < 2:
            raise MalformedConstraint(f"{constraint_tag(c)} constraint needs at least two branches")
        if len(set(c.branches)) != len(c.branches):
            raise MalformedConstraint(f"{constraint_tag(c)} constraint repeats a branch")
        if c.trigger in c.branches:
            raise MalformedConstraint(f"trigger {c.trigger!r} cannot also be a branch")
    else:
        raise TypeError(f"not a constraint: {c!r}")


def build_behavior(
    time: TimeSystem, actions: Iterable[Action], constraints: Iterable[Constraint] = ()
) -> Behavior:
    """Validate the pieces and freeze them into a :class:`Behavior`.

    The closure is computed once here; ``time`` is copied so that later
    mutation of the caller's builder cannot leak into the behavior.
    """
    time = time.copy()
    closure = compute_closure(time)
    table: dict[str, Action] = {}
    for a in actions:
        if a.id in table:
            raise DuplicateAction(f"action {a.id!r} declared twice")
        for ev in (a.instant_begin, a.instant_end):
            if ev not in time:
                raise UnknownTimeEvent(f"action {a.id!r} uses unknown time event {ev!r}")
        if a.instant_begin == a.instant_end:
            raise DegenerateAction(f"action {a.id!r} begins and ends at {a.instant_begin!r}")
        if not closure.precedes(a.instant_begin, a.instant_end):
            raise DegenerateAction(f"action {a.id!r}: end {a.instant_end!r} does not follow begin")
        table[a.id] = a
    constraints = tuple(constraints)
    for c in constraints:
        _validate_constraint(c, table)
    return Behavior(time=time, closure=closure, actions=table, constraints=constraints)


@dataclass(frozen=True)
class ConstraintVerdict:
    holds: bool
    reason: str | None = None
    witnesses: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        if self.holds:
            return {"verdict": "holds"}
        return {"verdict": "violated", "reason": self.reason, "witnesses": list(self.witnesses)}


HOLDS = ConstraintVerdict(True)


def check_seq(b: Behavior, sc: Seq) -> ConstraintVerdict:
    for x, y in combinations(sc.members, 2):
        if not (b.before(x, y) or b.before(y, x)):
            return ConstraintVerdict(False, "Unordered", (x, y))
    return HOLDS


def check_conc(b: Behavior, cc: Conc) -> ConstraintVerdict:
    late = [x for x in cc.branches if not b.before(cc.trigger, x)]
    if late:
        return ConstraintVerdict(False, "BranchNotAfterTrigger", (cc.trigger, *late))
    return HOLDS


def check_nondet(b: Behavior, ndc: NonDet) -> ConstraintVerdict:
    external = [x for x in ndc.branches if b.action(x).kind is not ActionKind.INTERNAL]
    if external:
        return ConstraintVerdict(False, "BranchNotInternal", tuple(external))
    if not any(b.before(ndc.trigger, x) for x in ndc.branches):
        return ConstraintVerdict(False, "NoBranchReachable", (ndc.trigger, *ndc.branches))
    return HOLDS


def check_constraint(b: Behavior, c: Constraint) -> ConstraintVerdict:
    if isinstance(c, Seq):
        return check_seq(b, c)
    if isinstance(c, Conc):
        return check_conc(b, c)
    if isinstance(c, NonDet):
        return check_nondet(b, c)
    raise TypeError(f"not a constraint: {c!r}")


@dataclass(frozen=True)
class CheckReport:
    time: InvariantReport
    intervals: dict[str, ConstraintVerdict]
    constraints: tuple[tuple[Constraint, ConstraintVerdict], ...] = field(default_factory=tuple)

    @property
    def all_hold(self) -> bool:
        return (
            self.time.ok
            and all(v.holds for v in self.intervals.values())
            and all(v.holds for _, v in self.constraints)
        )

    def verdicts(self) -> list[ConstraintVerdict]:
        return [v for _, v in self.constraints]

    def to_dict(self) -> dict:
        return {
            "all_hold": self.all_hold,
            "time": self.time.to_dict(),
            "intervals": {aid: v.to_dict() for aid, v in sorted(self.intervals.items())},
            "constraints": [
                {"index": i, "type": constraint_tag(c), **constraint_to_dict(c), **v.to_dict()}
                for i, (c, v) in enumerate(self.constraints)
            ],
        }


def constraint_to_dict(c: Constraint) -> dict:
    if isinstance(c, Seq):
        return {"members": list(c.members)}
    return {"trigger": c.trigger, "branches": list(c.branches)}


def check_all(b: Behavior) -> CheckReport:
    intervals = {}
    for aid, a in b.actions.items():
        if b.closure.precedes(a.instant_begin, a.instant_end):
            intervals[aid] = HOLDS
        else:
            intervals[aid] = ConstraintVerdict(False, "EndNotAfterBegin", (aid,))
    return CheckReport(
        time=check_time_invariants(b.time),
        intervals=intervals,
        constraints=tuple((c, check_constraint(b, c)) for c in b.constraints),
    )
