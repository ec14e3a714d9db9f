"""Behavioral constraint checking over partially ordered time, and uplink gain verification."""

from .behavior_model import (
    Action,
    ActionKind,
    Behavior,
    CheckReport,
    Conc,
    ConstraintVerdict,
    NonDet,
    Seq,
    build_behavior,
    check_all,
    check_conc,
    check_nondet,
    check_seq,
)
from .conformance import (
    Begin,
    BehaviorGraph,
    End,
    SplitKind,
    TraceEvent,
    Transition,
    Verdict,
    check_trace,
    classify_graph,
    graph_to_behavior,
)
from .time_model import ClosureView, TimeSystem, check_time_invariants, compute_closure
from .uplink_sim import (
    AdcConfig,
    AmpConfig,
    SourceKind,
    Stimulus,
    UplinkConfig,
    UplinkReport,
    adc_convert,
    measure_gain_db,
    mic_amp,
    run_uplink_check,
    select_input,
    synthesize,
)

__version__ = "0.1.0"
