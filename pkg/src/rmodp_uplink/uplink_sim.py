"""Uplink audio path: input selection -> microphone amplifier -> ideal ADC.

Sine stimuli are pushed through each selectable input, amplified at every
point of a gain sweep and quantized; gains measured at the amplifier and ADC
outputs are compared with the configured gain.  The control flow of the
procedure is itself modelled as a :class:`~rmodp_uplink.behavior_model.Behavior`
and checked alongside the signal results.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .behavior_model import ActionKind, Behavior, CheckReport, check_all
from .conformance import BehaviorGraph, SplitKind, Transition, graph_to_behavior

GAIN_MIN_DB = 3.0
GAIN_MAX_DB = 33.0


class UplinkError(Exception):
    pass


class ConfigError(UplinkError):
    pass


class NyquistViolation(ConfigError):
    pass


class NonIntegerPeriods(ConfigError):
    pass


class GainOutOfRange(ConfigError):
    pass


class MissingSource(UplinkError):
    pass


class DuplicateSource(UplinkError):
    pass


class SilentInput(UplinkError):
    pass


class SourceKind(enum.Enum):
    MIC_DIFFERENTIAL = "mic_differential"
    FML_MONO = "fml_mono"
    HSMIC_MONO = "hsmic_mono"


# order in which the inputs are exercised
SOURCE_ORDER = (SourceKind.MIC_DIFFERENTIAL, SourceKind.FML_MONO, SourceKind.HSMIC_MONO)


def _is_integer(x: float, rel: float = 1e-9) -> bool:
    return abs(x - round(x)) <= rel * max(1.0, abs(x))


@dataclass(frozen=True)
class Stimulus:
    kind: SourceKind
    amplitude: float
    frequency: float
    phase: float = 0.0
    duration: float = 0.25
    sample_rate: float = 48000.0
    # added to both legs of a differential input; must cancel
    common_mode: float = 0.0

    def __post_init__(self) -> None:
        for name in ("amplitude", "frequency", "duration", "sample_rate"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{self.kind.value}: {name} must be positive")
        if not self.sample_rate > 2 * self.frequency:
            raise NyquistViolation(
                f"{self.kind.value}: {self.frequency} Hz needs a sample rate above {2 * self.frequency} Hz"
            )
        if not _is_integer(self.duration * self.frequency):
            raise NonIntegerPeriods(
                f"{self.kind.value}: {self.duration} s holds {self.duration * self.frequency} periods"
            )
        if not _is_integer(self.duration * self.sample_rate):
            raise ConfigError(f"{self.kind.value}: duration is not a whole number of samples")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


@dataclass(frozen=True, eq=False)
class Signal:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("a signal needs a nonempty 1-D sample array")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.samples))))

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))


@dataclass(frozen=True, eq=False)
class DifferentialSignal:
    p: Signal
    n: Signal

    def difference(self) -> Signal:
        return Signal(self.p.samples - self.n.samples, self.p.sample_rate)


def _sine(st: Stimulus, amplitude: float) -> np.ndarray:
    i = np.arange(st.n_samples)
    return amplitude * np.sin(2 * np.pi * st.frequency * i / st.sample_rate + st.phase)


def synthesize(st: Stimulus) -> Signal | DifferentialSignal:
    """Sampled sine for ``st``; the differential input yields a P/N pair whose difference is the sine."""
    if st.kind is SourceKind.MIC_DIFFERENTIAL:
        half = _sine(st, st.amplitude / 2)
        return DifferentialSignal(
            Signal(st.common_mode + half, st.sample_rate),
            Signal(st.common_mode - half, st.sample_rate),
        )
    return Signal(_sine(st, st.amplitude), st.sample_rate)


def select_input(stimuli: list[Stimulus], selected: SourceKind) -> Signal:
    """Ideal input multiplexer: only the selected source reaches the output."""
    by_kind: dict[SourceKind, Stimulus] = {}
    for st in stimuli:
        if st.kind in by_kind:
            raise DuplicateSource(f"two stimuli for {st.kind.value}")
        by_kind[st.kind] = st
    missing = [k.value for k in SourceKind if k not in by_kind]
    if missing:
        raise MissingSource(f"no stimulus for {', '.join(missing)}")
    sig = synthesize(by_kind[selected])
    if isinstance(sig, DifferentialSignal):
        return sig.difference()
    return sig


@dataclass(frozen=True)
class AmpConfig:
    gain_db: float

    def __post_init__(self) -> None:
        if not GAIN_MIN_DB <= self.gain_db <= GAIN_MAX_DB:
            raise GainOutOfRange(f"gain {self.gain_db} dB outside [{GAIN_MIN_DB}, {GAIN_MAX_DB}] dB")

    @property
    def factor(self) -> float:
        return 10.0 ** (self.gain_db / 20.0)


def mic_amp(sig: Signal, cfg: AmpConfig) -> Signal:
    return Signal(sig.samples * cfg.factor, sig.sample_rate)


@dataclass(frozen=True)
class AdcConfig:
    bits: int = 16
    vref: float = 5.0

    def __post_init__(self) -> None:
        if not isinstance(self.bits, int) or self.bits < 2:
            raise ConfigError("ADC needs at least 2 bits")
        if not self.vref > 0:
            raise ConfigError("ADC reference must be positive")

    @property
    def lsb(self) -> float:
        return 2.0 * self.vref / 2**self.bits


@dataclass(frozen=True, eq=False)
class AdcResult:
    signal: Signal
    clipped: int


def adc_convert(sig: Signal, cfg: AdcConfig) -> AdcResult:
    """Mid-tread quantizer with 2**bits levels k*LSB, k in [-2**(bits-1), 2**(bits-1) - 1].

    Rounding is half away from zero.  A sample is counted as clipped when its
    code saturates, so unclipped samples are within half an LSB of the input.
    """
    # clamping to +-vref before rounding gives the same codes as saturating after it
    x = sig.samples / cfg.lsb
    raw = np.sign(x) * np.floor(np.abs(x) + 0.5)
    lo, hi = -(2 ** (cfg.bits - 1)), 2 ** (cfg.bits - 1) - 1
    clipped = int(np.count_nonzero((raw < lo) | (raw > hi)))
    codes = np.clip(raw, lo, hi)
    return AdcResult(Signal(codes * cfg.lsb, sig.sample_rate), clipped)


def measure_gain_db(inp: Signal, out: Signal) -> float:
    if len(inp) != len(out) or inp.sample_rate != out.sample_rate:
        raise ValueError("gain needs signals of equal length and sample rate")
    rms_in = inp.rms
    if rms_in == 0:
        raise SilentInput("input RMS is zero")
    return 20.0 * math.log10(out.rms / rms_in)


# ---------------------------------------------------------------------------
# sweep runner

DEFAULT_FREQUENCIES = {
    SourceKind.MIC_DIFFERENTIAL: 1004.0,
    SourceKind.FML_MONO: 1492.0,
    SourceKind.HSMIC_MONO: 1996.0,
}


def default_stimuli(amplitude: float = 0.1, duration: float = 0.25, sample_rate: float = 48000.0) -> list[Stimulus]:
    return [
        Stimulus(k, amplitude, DEFAULT_FREQUENCIES[k], duration=duration, sample_rate=sample_rate)
        for k in SOURCE_ORDER
    ]


def gain_range(start: float = GAIN_MIN_DB, stop: float = GAIN_MAX_DB, step: float = 1.0) -> list[float]:
    if step <= 0:
        raise ConfigError("gain step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [start + i * step for i in range(n + 1)]


@dataclass(frozen=True)
class UplinkConfig:
    stimuli: tuple[Stimulus, ...] = field(default_factory=lambda: tuple(default_stimuli()))
    gains_db: tuple[float, ...] = field(default_factory=lambda: tuple(gain_range()))
    adc: AdcConfig = field(default_factory=AdcConfig)
    tol_amp_db: float = 0.01
    tol_adc_db: float = 0.1
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "stimuli", tuple(self.stimuli))
        object.__setattr__(self, "gains_db", tuple(float(g) for g in self.gains_db))
        if not self.gains_db:
            raise ConfigError("empty gain sweep")
        for g in self.gains_db:
            AmpConfig(g)
        if self.tol_amp_db < 0 or self.tol_adc_db < 0:
            raise ConfigError("tolerances must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


@dataclass(frozen=True)
class SweepPoint:
    kind: SourceKind
    gain_db: float
    amp_gain_db: float
    adc_gain_db: float
    clipped: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "gain_db": self.gain_db,
            "amp_gain_db": self.amp_gain_db,
            "adc_gain_db": self.adc_gain_db,
            "clipped": self.clipped,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class UplinkReport:
    points: tuple[SweepPoint, ...]
    behavior_report: CheckReport
    config: UplinkConfig

    @property
    def ok(self) -> bool:
        return all(p.passed for p in self.points) and self.behavior_report.all_hold

    def failing(self) -> list[SweepPoint]:
        return [p for p in self.points if not p.passed]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "adc": {"bits": self.config.adc.bits, "vref": self.config.adc.vref},
            "tolerances_db": {"amp": self.config.tol_amp_db, "adc": self.config.tol_adc_db},
            "points": [p.to_dict() for p in self.points],
            "behavior": self.behavior_report.to_dict(),
        }


def uplink_graph() -> tuple[BehaviorGraph, dict[str, ActionKind]]:
    """Control flow of the procedure: stimulate, pick one input, amplify, convert, deliver."""
    selects = {
        SourceKind.MIC_DIFFERENTIAL: "select_mic",
        SourceKind.FML_MONO: "select_fml",
        SourceKind.HSMIC_MONO: "select_hsmic",
    }
    transitions = [Transition("idle", "apply_stimuli", "stimulated")]
    transitions += [Transition("stimulated", selects[k], "selected") for k in SOURCE_ORDER]
    transitions += [
        Transition("selected", "mic_amp", "amplified"),
        Transition("amplified", "adc_convert", "converted"),
        Transition("converted", "deliver_vsif", "delivered"),
    ]
    g = BehaviorGraph(
        states=("idle", "stimulated", "selected", "amplified", "converted", "delivered"),
        initial="idle",
        transitions=tuple(transitions),
        split_kinds={"stimulated": SplitKind.CHOICE},
    )
    kinds = {t.action: ActionKind.INTERNAL for t in transitions}
    kinds["deliver_vsif"] = ActionKind.INTERACTION
    return g, kinds


def uplink_behavior() -> Behavior:
    g, kinds = uplink_graph()
    return graph_to_behavior(g, kinds)


@dataclass(frozen=True, eq=False)
class StageSignals:
    selected: Signal
    amplified: Signal
    converted: AdcResult


def run_chain(stimuli: list[Stimulus], kind: SourceKind, gain_db: float, adc: AdcConfig) -> StageSignals:
    selected = select_input(stimuli, kind)
    amplified = mic_amp(selected, AmpConfig(gain_db))
    return StageSignals(selected, amplified, adc_convert(amplified, adc))


def _sweep_point(cfg: UplinkConfig, kind: SourceKind, gain_db: float) -> SweepPoint:
    st = run_chain(list(cfg.stimuli), kind, gain_db, cfg.adc)
    amp_gain = measure_gain_db(st.selected, st.amplified)
    adc_gain = measure_gain_db(st.selected, st.converted.signal)
    passed = (
        abs(amp_gain - gain_db) <= cfg.tol_amp_db
        and abs(adc_gain - gain_db) <= cfg.tol_adc_db
        and st.converted.clipped == 0
    )
    return SweepPoint(kind, gain_db, amp_gain, adc_gain, st.converted.clipped, passed)


def run_uplink_check(cfg: UplinkConfig | None = None) -> UplinkReport:
    cfg = cfg or UplinkConfig()
    select_input(list(cfg.stimuli), SOURCE_ORDER[0])  # fail fast on missing/duplicate sources
    jobs = [(k, g) for k in SOURCE_ORDER for g in cfg.gains_db]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            points = list(pool.map(lambda job: _sweep_point(cfg, *job), jobs))
    else:
        points = [_sweep_point(cfg, k, g) for k, g in jobs]
    return UplinkReport(tuple(points), check_all(uplink_behavior()), cfg)


def dump_waveforms(cfg: UplinkConfig, directory: str | Path) -> list[Path]:
    """Write ``index,volts`` CSV files for the selected, amplified and converted signals."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in SOURCE_ORDER:
        for gain in cfg.gains_db:
            st = run_chain(list(cfg.stimuli), kind, gain, cfg.adc)
            stages = {"input": st.selected, "amp": st.amplified, "adc": st.converted.signal}
            for stage, sig in stages.items():
                path = directory / f"{kind.value}_{gain:g}dB_{stage}.csv"
                data = np.column_stack([np.arange(len(sig)), sig.samples])
                np.savetxt(path, data, fmt=["%d", "%.9g"], delimiter=",", header="index,volts", comments="")
                written.append(path)
    return written
