import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from llmroute.powertrace import (PowerSample, ResidencyInterval, TraceError, Verdict,
                                 integrate_cpu_energy, parse_residency, parse_timechart,
                                 run_trials, stopping_decision, total_energy)
from oracles import piecewise_constant_energy


def constant_trace(cores, watts, duration, step=0.1):
    n = int(round(duration / step))
    return [PowerSample(i * step if i < n else duration, c, watts)
            for c in cores for i in range(n + 1)]


def test_constant_power_full_residency():
    trace = constant_trace([0], 100.0, 10.0)
    assert integrate_cpu_energy(trace, [ResidencyInterval(0, 0.0, 10.0)]) == 1000.0


def test_residency_filters_cores():
    trace = constant_trace([0, 1], 50.0, 10.0)
    got = integrate_cpu_energy(trace, [ResidencyInterval(0, 0.0, 10.0)])
    assert got == pytest.approx(500.0, abs=1e-9)


def test_clipped_residency_hand_computed():
    trace = [PowerSample(float(t), 0, 100.0) for t in range(4)]
    # [0.5, 1.5] covers half of [0,1) and half of [1,2) at 100 W
    assert integrate_cpu_energy(trace, [ResidencyInterval(0, 0.5, 1.5)]) == pytest.approx(100.0, abs=1e-9)


def test_varying_power_against_riemann_oracle():
    samples = [(0.0, 10.0), (0.3, 40.0), (0.7, 25.0), (1.6, 80.0), (2.0, 5.0)]
    trace = [PowerSample(t, 3, p) for t, p in samples]
    got = integrate_cpu_energy(trace, [ResidencyInterval(3, 0.2, 1.9)])
    assert got == pytest.approx(piecewise_constant_energy(samples, 0.2, 1.9), abs=1e-3)


def test_final_sample_contributes_nothing():
    trace = [PowerSample(0.0, 0, 10.0), PowerSample(1.0, 0, 1e6)]
    assert integrate_cpu_energy(trace, [ResidencyInterval(0, 0.0, 5.0)]) == 10.0


def test_unsorted_trace_rejected():
    trace = [PowerSample(1.0, 0, 1.0), PowerSample(0.5, 0, 1.0)]
    with pytest.raises(TraceError, match="increasing"):
        integrate_cpu_energy(trace, [])


def test_unknown_core_rejected():
    trace = constant_trace([0], 1.0, 1.0)
    with pytest.raises(TraceError, match=r"\[4, 7\]"):
        integrate_cpu_energy(trace, [ResidencyInterval(7, 0, 1), ResidencyInterval(4, 0, 1)])


def test_overlapping_residency_rejected():
    trace = constant_trace([0], 1.0, 1.0)
    with pytest.raises(TraceError, match="overlapping"):
        integrate_cpu_energy(trace, [ResidencyInterval(0, 0, 0.6), ResidencyInterval(0, 0.5, 1)])


def test_empty_trace_rejected():
    with pytest.raises(TraceError):
        integrate_cpu_energy([], [])


@st.composite
def traces(draw):
    n = draw(st.integers(2, 30))
    gaps = draw(st.lists(st.floats(0.01, 2.0), min_size=n - 1, max_size=n - 1))
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    watts = draw(st.lists(st.floats(0.0, 500.0), min_size=n, max_size=n))
    return [PowerSample(float(t), 0, w) for t, w in zip(times, watts)], float(times[-1])


@given(traces(), st.integers(-10, 10))
def test_power_scaling_by_powers_of_two_is_exact(tr, k):
    trace, end = tr
    res = [ResidencyInterval(0, 0.0, end)]
    scaled = [PowerSample(s.time_s, s.core_id, s.power_w * 2.0**k) for s in trace]
    assert integrate_cpu_energy(scaled, res) == integrate_cpu_energy(trace, res) * 2.0**k


@given(traces(), st.floats(0.01, 100.0))
def test_power_scaling_is_linear(tr, c):
    trace, end = tr
    res = [ResidencyInterval(0, 0.0, end)]
    scaled = [PowerSample(s.time_s, s.core_id, s.power_w * c) for s in trace]
    assert integrate_cpu_energy(scaled, res) == pytest.approx(c * integrate_cpu_energy(trace, res),
                                                              rel=1e-12, abs=1e-300)


@given(traces(), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_additive_over_disjoint_residency(tr, f1, f2):
    trace, end = tr
    a, b = sorted((f1 * end, f2 * end))
    if b - a < 1e-6:
        return
    whole = integrate_cpu_energy(trace, [ResidencyInterval(0, 0.0, end)])
    parts = integrate_cpu_energy(trace, [ResidencyInterval(0, 0.0, a), ResidencyInterval(0, a, b),
                                         ResidencyInterval(0, b, end)])
    assert parts == pytest.approx(whole, rel=1e-12, abs=1e-9)
    inner = integrate_cpu_energy(trace, [ResidencyInterval(0, a, b)])
    assert inner <= whole + 1e-9


def test_parse_csv_inputs():
    trace = parse_timechart("time_s,core_id,power_w\n0,0,10\n1,0,10\n")
    res = parse_residency(b"core_id,start_s,end_s\n0,0,1\n")
    assert integrate_cpu_energy(trace, res) == 10.0


def test_parse_residency_bad_interval():
    with pytest.raises(ValueError):
        parse_residency("core_id,start_s,end_s\n0,2,1\n")


@pytest.mark.parametrize("cpu,gpu,expected", [(500, 1500, 2000), (0, 42.5, 42.5), (1000.5, 0, 1000.5)])
def test_total_energy(cpu, gpu, expected):
    assert total_energy(cpu, gpu) == expected


def test_total_energy_rejects_negative():
    with pytest.raises(ValueError):
        total_energy(-1, 2)


# ------------------------------------------------------------------ stopping

def test_stop_zero_variance():
    d = stopping_decision([5.0, 5.0])
    assert d.verdict is Verdict.STOP_CONFIDENT
    assert d.ci_half_width_s == 0.0


def test_stop_max_trials():
    rng = np.random.default_rng(0)
    d = stopping_decision(list(rng.uniform(0, 1000, 25)))
    assert d.verdict is Verdict.STOP_MAX_TRIALS


def test_continue_two_far_apart():
    d = stopping_decision([5.0, 9.0])
    assert d.verdict is Verdict.CONTINUE
    # s = 2*sqrt(2), t_{0.975,1} from the quadrature oracle
    assert d.ci_half_width_s == pytest.approx(25.41240947234946, rel=1e-9)
    assert d.mean_runtime_s == 7.0


def test_single_trial_continues():
    d = stopping_decision([3.0])
    assert d.verdict is Verdict.CONTINUE and math.isinf(d.ci_half_width_s)


@pytest.mark.parametrize("bad", [dict(runtimes_s=[]), dict(runtimes_s=[1.0], confidence=1.0),
                                 dict(runtimes_s=[1.0], confidence=0.0), dict(runtimes_s=[-1.0])])
def test_stop_errors(bad):
    with pytest.raises(ValueError):
        stopping_decision(**bad)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=30), st.floats(0.01, 10), st.floats(0.01, 10))
def test_stop_monotone_in_threshold(xs, h1, h2):
    lo, hi = sorted((h1, h2))
    a = stopping_decision(xs, half_width_s=lo)
    b = stopping_decision(xs, half_width_s=hi)
    if a.stop:
        assert b.stop
    if a.verdict is Verdict.STOP_CONFIDENT:
        assert a.ci_half_width_s <= lo


def test_run_trials_zero_variance_stops_at_two():
    runtimes, d = run_trials(lambda: 4.2)
    assert len(runtimes) == 2 and d.verdict is Verdict.STOP_CONFIDENT


def test_run_trials_adversarial_stops_at_25():
    values = iter([0.0, 100.0] * 20)
    runtimes, d = run_trials(lambda: next(values))
    assert len(runtimes) == 25 and d.verdict is Verdict.STOP_MAX_TRIALS
