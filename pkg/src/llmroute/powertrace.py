"""CPU energy from per-core power timecharts and core residency, plus the
adaptive stop rule for repeated timing trials.

Power is held piecewise-constant: sample ``i`` of a core applies on
``[t_i, t_{i+1})`` and the last sample of each core contributes nothing.
Residency is intersected with those steps exactly, not snapped to samples.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import LLMRouteError, ParseError, Source, _csv_rows, _read_text
from .stats import _exact_dot, t_quantile

TIMECHART_HEADER = ("time_s", "core_id", "power_w")
RESIDENCY_HEADER = ("core_id", "start_s", "end_s")


class TraceError(LLMRouteError, ValueError):
    pass


@dataclass(frozen=True)
class PowerSample:
    time_s: float
    core_id: int
    power_w: float


@dataclass(frozen=True)
class ResidencyInterval:
    core_id: int
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"residency interval needs start < end, got [{self.start_s}, {self.end_s}]")


def _float(text: str, what: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{what} is not a number: {text!r}", line=line) from None
    if not math.isfinite(v) or v < 0:
        raise ParseError(f"{what} must be finite and nonnegative, got {v}", line=line)
    return v


def _core(text: str, line: int) -> int:
    try:
        v = int(text)
    except ValueError:
        raise ParseError(f"core_id is not an integer: {text!r}", line=line) from None
    if v < 0:
        raise ParseError("core_id is negative", line=line)
    return v


def parse_timechart(source: Source) -> list[PowerSample]:
    return [PowerSample(_float(t, "time_s", ln), _core(c, ln), _float(p, "power_w", ln))
            for ln, (t, c, p) in _csv_rows(_read_text(source), TIMECHART_HEADER)]


def parse_residency(source: Source) -> list[ResidencyInterval]:
    out = []
    for ln, (c, s, e) in _csv_rows(_read_text(source), RESIDENCY_HEADER):
        try:
            out.append(ResidencyInterval(_core(c, ln), _float(s, "start_s", ln), _float(e, "end_s", ln)))
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), line=ln) from None
    return out


def _per_core(trace: Iterable[PowerSample]) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    times: dict[int, list[float]] = {}
    power: dict[int, list[float]] = {}
    for s in trace:
        times.setdefault(s.core_id, []).append(s.time_s)
        power.setdefault(s.core_id, []).append(s.power_w)
    out = {}
    for core, ts in times.items():
        t = np.asarray(ts, dtype=np.float64)
        if np.any(np.diff(t) <= 0):
            raise TraceError(f"samples for core {core} are not strictly increasing in time")
        out[core] = (t, np.asarray(power[core], dtype=np.float64))
    return out


def integrate_cpu_energy(trace: Sequence[PowerSample],
                         residency: Iterable[ResidencyInterval]) -> float:
    """Joules drawn by the cores while they were resident.

    For every resident core, sums ``power_i * overlap(residency, [t_i, t_{i+1}))``
    over its sample steps. The sum is accumulated exactly and rounded once.
    """
    if not trace:
        raise TraceError("power trace is empty")
    cores = _per_core(trace)
    by_core: dict[int, list[ResidencyInterval]] = {}
    for iv in residency:
        by_core.setdefault(iv.core_id, []).append(iv)
    absent = sorted(set(by_core) - set(cores))
    if absent:
        raise TraceError(f"residency references core(s) absent from trace: {absent}")

    powers, weights = [], []
    for core, ivs in by_core.items():
        ivs = sorted(ivs, key=lambda iv: iv.start_s)
        for prev, nxt in zip(ivs, ivs[1:]):
            if nxt.start_s < prev.end_s:
                raise TraceError(f"overlapping residency intervals on core {core}")
        t, p = cores[core]
        lo, hi = t[:-1], t[1:]
        for iv in ivs:
            overlap = np.minimum(hi, iv.end_s) - np.maximum(lo, iv.start_s)
            mask = overlap > 0
            powers.append(p[:-1][mask])
            weights.append(overlap[mask])
    if not powers:
        return 0.0
    return max(0.0, _exact_dot(np.concatenate(powers), np.concatenate(weights)))


def total_energy(cpu_j: float, gpu_j: float) -> float:
    """CPU plus GPU joules for one inference run."""
    for name, v in (("cpu_j", cpu_j), ("gpu_j", gpu_j)):
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{name} must be finite and nonnegative, got {v}")
    return cpu_j + gpu_j


class Verdict(enum.Enum):
    CONTINUE = "continue"
    STOP_CONFIDENT = "stop_confident"
    STOP_MAX_TRIALS = "stop_max_trials"


@dataclass(frozen=True)
class StopDecision:
    verdict: Verdict
    mean_runtime_s: float
    ci_half_width_s: float
    n_trials: int

    @property
    def stop(self) -> bool:
        return self.verdict is not Verdict.CONTINUE


def stopping_decision(runtimes_s: Sequence[float], confidence: float = 0.95,
                      half_width_s: float = 0.5, max_trials: int = 25) -> StopDecision:
    """Decide whether another timing trial is needed.

    Stops once the two-sided t-interval for the mean runtime has half-width at
    most ``half_width_s`` (needs two trials), or unconditionally at
    ``max_trials``. The half-width is ``inf`` for a single trial.
    """
    x = np.asarray(runtimes_s, dtype=np.float64)
    if x.size == 0:
        raise ValueError("runtimes must be nonempty")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("runtimes must be finite and nonnegative")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    n = int(x.size)
    mean = float(x.mean())
    if n >= 2:
        s = float(x.std(ddof=1))
        hw = 0.0 if s == 0.0 else s / math.sqrt(n) * t_quantile(1.0 - (1.0 - confidence) / 2.0, n - 1)
    else:
        hw = math.inf
    if n >= max_trials:
        verdict = Verdict.STOP_MAX_TRIALS
    elif n >= 2 and hw <= half_width_s:
        verdict = Verdict.STOP_CONFIDENT
    else:
        verdict = Verdict.CONTINUE
    return StopDecision(verdict, mean, hw, n)


def run_trials(measure, confidence: float = 0.95, half_width_s: float = 0.5,
               max_trials: int = 25) -> tuple[list[float], StopDecision]:
    """Call ``measure()`` (returning one runtime in seconds) until the stop
    rule fires. Returns the runtimes and the final decision."""
    runtimes: list[float] = []
    while True:
        runtimes.append(float(measure()))
        decision = stopping_decision(runtimes, confidence, half_width_s, max_trials)
        if decision.stop:
            return runtimes, decision
