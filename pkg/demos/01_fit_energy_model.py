# # Fitting per-model energy and runtime predictors
#
# Each model's energy is predicted as a bilinear function of its input and
# output token counts with no intercept:
#
#     e(tin, tout) = a0*tin + a1*tout + a2*tin*tout
#
# Here we fake a measurement campaign on the 8..2048 token grid, add 5%
# multiplicative noise, and recover the coefficients by least squares.

import numpy as np

from llmroute import core, stats

fleet = core.load_bundled_profiles("case_study")
for p in fleet:
    print(p.name, "alpha =", p.energy_coeffs)

# ## Noiseless measurements
#
# With no noise the fit interpolates exactly, so R^2 is 1.

clean = core.synthesize_measurements(fleet)
for name, fit in stats.fit_records(clean, "energy").items():
    print(f"{name:15s} {np.round(fit.coeffs, 8)}  R2={fit.r_squared:.12f}")

# ## Noisy measurements, repeated trials
#
# 25 trials per grid cell (the maximum the stop rule allows). The uncentered
# R^2 is what makes sense without an intercept.

noisy = core.synthesize_measurements(fleet, trials=25, noise=0.05, seed=7)
fits = stats.fit_records(noisy, "energy")
for p in fleet:
    fit = fits[p.name]
    rel = np.array(fit.coeffs) / np.array(p.energy_coeffs) - 1
    print(f"{p.name:15s} rel err {np.round(rel, 4)}  R2={fit.r_squared:.4f}  "
          f"F={fit.f_statistic:.1f} p={fit.p_value:.2e}")

# The tiny tin*tout coefficient is the hardest one to pin down; its standard
# error relative to its size is the number to watch.
for p in fleet:
    fit = fits[p.name]
    print(p.name, "stderr/coef:", np.round(np.array(fit.stderr) / np.abs(fit.coeffs), 4))
