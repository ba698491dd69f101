# # Which token count matters? A two-way ANOVA
#
# Treat tin and tout as categorical factors on a balanced grid with repeated
# trials and split the variance of energy into input, output, interaction and
# error components.

import numpy as np

from llmroute import core, stats

fleet = core.load_bundled_profiles("case_study")
records = core.synthesize_measurements(fleet[:1], levels=(8, 32, 128, 512, 2048),
                                       trials=3, noise=0.05, seed=11)

table = stats.anova_from_records(records, "energy")
print(f"{'source':14s} {'SS':>14s} {'dof':>4s} {'F':>10s} {'p':>10s}")
for row in table.rows:
    f = "" if row.f_statistic is None else f"{row.f_statistic:10.2f}"
    p = "" if row.p_value is None else f"{row.p_value:10.2e}"
    print(f"{row.source:14s} {row.sum_squares:14.4e} {row.dof:4d} {f:>10s} {p:>10s}")
print("SS total", f"{table.ss_total:.4e}")

# Output tokens dominate: decoding one token at a time is what costs energy.

# ## Sanity check: the pieces add up

parts = sum(r.sum_squares for r in table.rows)
print("partition residual:", abs(parts - table.ss_total) / table.ss_total)

# ## A null model
#
# Purely additive data should give a uniformly distributed interaction p.

rng = np.random.default_rng(0)
lv = np.array([8.0, 16.0, 32.0, 64.0])
pvals = [stats.two_way_anova(lv[:, None, None] + lv[None, :, None] + rng.normal(0, 3, (4, 4, 3)))
         ["interaction"].p_value for _ in range(300)]
print("fraction of null p-values below 0.05:", np.mean(np.array(pvals) < 0.05))
