# # Baselines: round-robin, random, one model for everything

import numpy as np

from llmroute import core, scheduler

fleet = core.load_bundled_profiles("case_study")
workload = core.generate_workload(500, core.LogNormal(4.0, 1.0, 2048), seed=42)
norm = scheduler.compute_normalizers(fleet, workload)
zeta = 0.5

rr = scheduler.evaluate(scheduler.round_robin(workload, fleet), fleet, workload, zeta, norm)
rand = [scheduler.evaluate(scheduler.random_assign(workload, fleet, s), fleet, workload, zeta, norm)
        for s in range(20)]
print(f"round-robin energy {rr.total_energy_j:.1f} J")
print(f"random energy      {np.mean([m.total_energy_j for m in rand]):.1f} J "
      f"(sd {np.std([m.total_energy_j for m in rand]):.1f} over 20 seeds)")

# Round-robin and random spread queries evenly in expectation, so their totals
# are nearly the same.

for k, p in enumerate(fleet):
    m = scheduler.evaluate(scheduler.single_model(workload, fleet, k), fleet, workload, zeta, norm)
    print(f"all on {p.name:15s} energy {m.total_energy_j:10.1f} J  objective {m.objective_value:8.3f}")

# ## Against the optimum
#
# Baselines ignore the capacity caps, so compare them with the optimum under
# the same (empty) constraints.

_, best = scheduler.solve_offline(fleet, workload, zeta, scheduler.RoutingConstraints.relaxed(), norm)
print(f"optimal objective {best.objective_value:.3f} vs round-robin {rr.objective_value:.3f}")
