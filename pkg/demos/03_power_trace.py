# # From a power trace to joules
#
# CPU energy comes from a per-core power timechart (zero-order hold between
# samples) restricted to the intervals the inference process ran on each
# core. GPU energy is added as a single number.

import numpy as np

from llmroute import powertrace

rng = np.random.default_rng(1)
times = np.arange(0.0, 5.01, 0.1)
lines = ["time_s,core_id,power_w"]
for core_id in (0, 1, 2):
    watts = 20 + 15 * rng.random(len(times))
    lines += [f"{t:.1f},{core_id},{w:.3f}" for t, w in zip(times, watts)]
trace = powertrace.parse_timechart("\n".join(lines) + "\n")

residency = powertrace.parse_residency(
    "core_id,start_s,end_s\n"
    "0,0.0,2.5\n"
    "1,2.5,5.0\n"
    "2,1.0,1.35\n")

cpu = powertrace.integrate_cpu_energy(trace, residency)
print(f"CPU energy while resident: {cpu:.3f} J")
print(f"with 812.5 J of GPU energy: {powertrace.total_energy(cpu, 812.5):.3f} J")

# ## How many repetitions?
#
# Repeat a measurement until the 95% t-interval on mean runtime is within
# +/- 0.5 s, or give up after 25 trials.

runtimes, decision = powertrace.run_trials(lambda: rng.normal(12.0, 0.4))
print(decision.verdict.name, "after", decision.n_trials, "trials;",
      f"mean {decision.mean_runtime_s:.3f} s +/- {decision.ci_half_width_s:.3f} s")

runtimes, decision = powertrace.run_trials(lambda: abs(rng.normal(12.0, 6.0)))
print(decision.verdict.name, "after", decision.n_trials, "trials;",
      f"mean {decision.mean_runtime_s:.3f} s +/- {decision.ci_half_width_s:.3f} s")
