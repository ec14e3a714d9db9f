"""JSON readers and writers for behavior specs, traces, uplink configs and reports."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

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
from .conformance import BehaviorGraph, SplitKind, TraceEvent, Transition, graph_to_behavior
from .time_model import TimeSystem
from .uplink_sim import AdcConfig, SourceKind, Stimulus, UplinkConfig, default_stimuli, gain_range


class SpecFormatError(Exception):
    """Input file is not valid JSON or does not match the expected shape."""


def read_json(path: str | Path) -> Any:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"{path}:{exc.lineno}:{exc.colno} (offset {exc.pos}): {exc.msg}") from exc


def _field(obj: Any, key: str, where: str, kind: type | tuple = object) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise SpecFormatError(f"{where}: missing {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        raise SpecFormatError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return value


def _enum(cls, value: Any, where: str):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise SpecFormatError(f"{where}: {value!r} is not one of {choices}") from None


@dataclass
class SpecDocument:
    time: TimeSystem
    actions: list[Action] | None
    constraints: list[Constraint]
    graph: BehaviorGraph | None
    kinds: dict[str, ActionKind]

    def behavior(self) -> Behavior:
        if self.actions is None:
            assert self.graph is not None
            return graph_to_behavior(self.graph, self.kinds)
        return build_behavior(self.time, self.actions, self.constraints)


def parse_spec(doc: Any) -> SpecDocument:
    """Parse a spec document. The time section is kept verbatim so invariant checks can see a bad one."""
    if not isinstance(doc, dict):
        raise SpecFormatError("spec: top level must be an object")

    ts = TimeSystem()
    if "time" in doc:
        time = _field(doc, "time", "spec", dict)
        events = _field(time, "events", "time", list)
        edges = time.get("next_edges", [])
        for i, ev in enumerate(events):
            if not isinstance(ev, str) or not ev:
                raise SpecFormatError(f"time.events[{i}]: expected a nonempty string")
            if ev in events[:i]:
                raise SpecFormatError(f"time.events[{i}]: duplicate event {ev!r}")
        if not isinstance(edges, list):
            raise SpecFormatError("time.next_edges: expected a list")
        pairs = []
        for i, e in enumerate(edges):
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e)):
                raise SpecFormatError(f"time.next_edges[{i}]: expected [from, to]")
            pairs.append((e[0], e[1]))
        ts = TimeSystem.from_edges(events, pairs, validate=False)

    actions = None
    kinds: dict[str, ActionKind] = {}
    if "actions" in doc:
        actions = []
        for i, a in enumerate(_field(doc, "actions", "spec", list)):
            where = f"actions[{i}]"
            if not isinstance(a, dict):
                raise SpecFormatError(f"{where}: expected an object")
            kind = _enum(ActionKind, a.get("kind", "internal"), f"{where}.kind")
            actions.append(
                Action(
                    _field(a, "id", where, str),
                    _field(a, "begin", where, str),
                    _field(a, "end", where, str),
                    kind,
                )
            )
            kinds[actions[-1].id] = kind

    constraints = [parse_constraint(c, f"constraints[{i}]") for i, c in enumerate(doc.get("constraints", []))]

    graph = None
    if "graph" in doc:
        graph, graph_kinds = parse_graph(_field(doc, "graph", "spec", dict))
        for k, v in graph_kinds.items():
            kinds.setdefault(k, v)
    if actions is None and graph is None:
        raise SpecFormatError("spec: needs an 'actions' section or a 'graph' section")
    return SpecDocument(ts, actions, constraints, graph, kinds)


def parse_constraint(c: Any, where: str) -> Constraint:
    tag = _field(c, "type", where, str)
    if tag == "seq":
        return Seq(_str_list(_field(c, "members", where, list), f"{where}.members"))
    if tag in ("conc", "nondet"):
        trigger = _field(c, "trigger", where, str)
        branches = _str_list(_field(c, "branches", where, list), f"{where}.branches")
        return Conc(trigger, branches) if tag == "conc" else NonDet(trigger, branches)
    raise SpecFormatError(f"{where}.type: unknown constraint type {tag!r}")


def _str_list(xs: list, where: str) -> list[str]:
    if not all(isinstance(x, str) for x in xs):
        raise SpecFormatError(f"{where}: expected a list of strings")
    return xs


def parse_graph(g: dict) -> tuple[BehaviorGraph, dict[str, ActionKind]]:
    states = _str_list(_field(g, "states", "graph", list), "graph.states")
    transitions = []
    for i, t in enumerate(_field(g, "transitions", "graph", list)):
        where = f"graph.transitions[{i}]"
        transitions.append(Transition(_field(t, "from", where, str), _field(t, "action", where, str), _field(t, "to", where, str)))
    split = {s: _enum(SplitKind, k, f"graph.split_kinds.{s}") for s, k in g.get("split_kinds", {}).items()}
    kinds = {a: _enum(ActionKind, k, f"graph.kinds.{a}") for a, k in g.get("kinds", {}).items()}
    graph = BehaviorGraph(tuple(states), _field(g, "initial", "graph", str), tuple(transitions), split)
    return graph, kinds


def parse_trace(doc: Any) -> list[TraceEvent]:
    if not isinstance(doc, list):
        raise SpecFormatError("trace: top level must be an array")
    out = []
    for i, e in enumerate(doc):
        ev = _field(e, "ev", f"trace[{i}]", str)
        if ev not in ("begin", "end"):
            raise SpecFormatError(f"trace[{i}].ev: expected 'begin' or 'end'")
        out.append(TraceEvent(ev, _field(e, "action", f"trace[{i}]", str)))
    return out


def dump_trace(trace: list[TraceEvent]) -> list[dict]:
    return [{"ev": e.ev, "action": e.action} for e in trace]


def parse_uplink_config(doc: Any) -> UplinkConfig:
    """Build an :class:`UplinkConfig`; every section is optional and falls back to the defaults.

    ``stimuli`` maps a source kind to ``{amplitude, frequency, phase, duration,
    sample_rate, common_mode}``; ``gains_db`` is either a list or
    ``{"start", "stop", "step"}``.
    """
    if not isinstance(doc, dict):
        raise SpecFormatError("config: top level must be an object")
    stimuli = {st.kind: st for st in default_stimuli()}
    for key, spec in doc.get("stimuli", {}).items():
        kind = _enum(SourceKind, key, f"stimuli.{key}")
        if not isinstance(spec, dict):
            raise SpecFormatError(f"stimuli.{key}: expected an object")
        base = stimuli[kind]
        params = {
            name: float(spec.get(name, getattr(base, name)))
            for name in ("amplitude", "frequency", "phase", "duration", "sample_rate", "common_mode")
        }
        stimuli[kind] = Stimulus(kind, **params)

    gains = doc.get("gains_db", {})
    if isinstance(gains, list):
        gains_db = [float(g) for g in gains]
    elif isinstance(gains, dict):
        gains_db = gain_range(float(gains.get("start", 3.0)), float(gains.get("stop", 33.0)), float(gains.get("step", 1.0)))
    else:
        raise SpecFormatError("gains_db: expected a list or a {start, stop, step} object")

    adc = doc.get("adc", {})
    tol = doc.get("tolerances_db", {})
    return UplinkConfig(
        stimuli=tuple(stimuli.values()),
        gains_db=tuple(gains_db),
        adc=AdcConfig(bits=int(adc.get("bits", 16)), vref=float(adc.get("vref", 5.0))),
        tol_amp_db=float(tol.get("amp", 0.01)),
        tol_adc_db=float(tol.get("adc", 0.1)),
        workers=int(doc.get("workers", 1)),
    )


def _round_floats(obj: Any) -> Any:
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_floats(v) for v in obj]
    return obj


def dumps_report(report: dict) -> str:
    """Stable serialization: sorted keys, floats cut to 9 significant digits."""
    return json.dumps(_round_floats(report), sort_keys=True, indent=2) + "\n"
