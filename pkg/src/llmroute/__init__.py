"""Workload-based energy/runtime models for LLM inference and offline
energy-vs-accuracy routing across a fleet of hosted models."""

from .core import (Assignment, InfeasibleError, LLMRouteError, LogNormal, MeasurementRecord,
                   ModelProfile, ParseError, Query, Uniform, Workload, generate_workload,
                   load_bundled_profiles, parse_measurements, parse_profiles, parse_workload,
                   serialize_workload, synthesize_measurements)
from .models import (CostMatrix, Normalizers, accuracy_score, build_cost_matrix,
                     compute_normalizers, predict_energy, predict_runtime)
from .powertrace import (PowerSample, ResidencyInterval, StopDecision, Verdict,
                         integrate_cpu_energy, stopping_decision, total_energy)
from .scheduler import (CapacityMode, Metrics, RoutingConstraints, brute_force, evaluate,
                        random_assign, round_robin, single_model, solve_offline, sweep_zeta)
from .stats import (AnovaTable, FitResult, f_cdf, ols_fit_no_intercept, t_quantile,
                    two_way_anova)

__version__ = "0.1.0"
