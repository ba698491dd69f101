"""Per-model predictors and the normalized energy/accuracy routing cost."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LLMRouteError, ModelProfile, Query, Workload


class NormalizationError(LLMRouteError, ValueError):
    pass


def _bilinear(c: Sequence[float], tau_in, tau_out):
    return c[0] * tau_in + c[1] * tau_out + c[2] * (tau_in * tau_out)


def predict_energy(profile: ModelProfile, q: Query) -> float:
    """Joules for query ``q``; bilinear in the token counts, no intercept."""
    return float(_bilinear(profile.energy_coeffs, float(q.tau_in), float(q.tau_out)))


def predict_runtime(profile: ModelProfile, q: Query) -> float:
    return float(_bilinear(profile.runtime_coeffs, float(q.tau_in), float(q.tau_out)))


def accuracy_score(profile: ModelProfile, q: Query) -> float:
    """Accuracy mass ``A_K * (tau_in + tau_out)``, with ``A_K`` in percent."""
    return profile.accuracy_const * q.tau_in + profile.accuracy_const * q.tau_out


def energy_table(fleet: Sequence[ModelProfile], workload: Workload) -> np.ndarray:
    """``(m, K)`` array of predicted joules, vectorized ``predict_energy``."""
    return np.column_stack([_bilinear(p.energy_coeffs, workload.tau_in, workload.tau_out)
                            for p in fleet])


def runtime_table(fleet: Sequence[ModelProfile], workload: Workload) -> np.ndarray:
    return np.column_stack([_bilinear(p.runtime_coeffs, workload.tau_in, workload.tau_out)
                            for p in fleet])


def accuracy_table(fleet: Sequence[ModelProfile], workload: Workload) -> np.ndarray:
    return np.column_stack([p.accuracy_const * workload.tau_in + p.accuracy_const * workload.tau_out
                            for p in fleet])


@dataclass(frozen=True)
class Normalizers:
    max_energy_j: float
    max_accuracy: float


def compute_normalizers(fleet: Sequence[ModelProfile], workload: Workload) -> Normalizers:
    """Largest predicted energy and accuracy over every (model, query) pair."""
    if not fleet:
        raise NormalizationError("fleet is empty")
    if len(workload) == 0:
        raise NormalizationError("workload is empty")
    e = float(energy_table(fleet, workload).max())
    a = float(accuracy_table(fleet, workload).max())
    if not e > 0:
        raise NormalizationError(f"maximum predicted energy is {e:g} <= 0; check the fitted coefficients")
    if not a > 0:
        raise NormalizationError(f"maximum accuracy score is {a:g} <= 0")
    return Normalizers(e, a)


@dataclass(frozen=True)
class CostMatrix:
    """``entries[i, k] = zeta * e_k(q_i) / max_e - (1 - zeta) * a_k(q_i) / max_a``."""

    entries: np.ndarray
    zeta: float
    normalizers: Normalizers

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def build_cost_matrix(fleet: Sequence[ModelProfile], workload: Workload, zeta: float,
                      normalizers: Normalizers | None = None) -> CostMatrix:
    """Scalarized cost of sending each query to each model.

    Normalizers default to the maxima over this fleet and workload, so
    rescaling every energy coefficient by the same factor leaves the matrix
    unchanged.
    """
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"zeta must be in [0, 1], got {zeta}")
    norm = normalizers or compute_normalizers(fleet, workload)
    e_hat = energy_table(fleet, workload) / norm.max_energy_j
    a_hat = accuracy_table(fleet, workload) / norm.max_accuracy
    entries = zeta * e_hat - (1.0 - zeta) * a_hat
    if not np.all(np.isfinite(entries)):
        raise NormalizationError("cost matrix has non-finite entries")
    entries.flags.writeable = False
    return CostMatrix(entries, float(zeta), norm)
