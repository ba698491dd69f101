"""Offline routing of a workload across a fleet.

With count-based constraints (at least ``min_per_model`` queries per model,
at most ``ceil(gamma_K * m)`` when capped) the assignment problem is a
transportation problem, solved exactly here as a min-cost flow:

    source -> query i        capacity 1
    query i -> model K       capacity 1, cost C[i, K]
    model K -> demand sink   capacity min_K        (lower bound)
    model K -> excess node   capacity cap_K - min_K
    excess node -> sink      capacity m - sum(min)

A flow of value ``m`` exists iff the constraints are feasible, and it
saturates every lower-bound arc.
"""
from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Assignment, InfeasibleError, ModelProfile, Workload
from .flow import MinCostFlow
from .models import (Normalizers, accuracy_table, build_cost_matrix, compute_normalizers,
                     energy_table, runtime_table)

log = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10**7
_CAP_EPS = 1e-9


class CapacityMode(enum.Enum):
    UNBOUNDED = "unbounded"
    FRACTION_CAP = "fraction_cap"


@dataclass(frozen=True)
class RoutingConstraints:
    min_per_model: int = 1
    capacity_mode: CapacityMode = CapacityMode.UNBOUNDED

    def __post_init__(self):
        if self.min_per_model < 0:
            raise ValueError("min_per_model must be >= 0")

    @classmethod
    def relaxed(cls) -> "RoutingConstraints":
        return cls(min_per_model=0)

    @classmethod
    def gamma_capped(cls, min_per_model: int = 1) -> "RoutingConstraints":
        return cls(min_per_model, CapacityMode.FRACTION_CAP)

    def bounds(self, fleet: Sequence[ModelProfile], m: int) -> tuple[list[int], list[int]]:
        """Per-model ``(mins, caps)`` for a workload of ``m`` queries."""
        mins = [self.min_per_model] * len(fleet)
        if self.capacity_mode is CapacityMode.UNBOUNDED:
            return mins, [m] * len(fleet)
        caps = []
        for p in fleet:
            g = p.capacity_fraction
            # a profile without gamma is uncapped
            caps.append(m if g is None else min(m, math.ceil(g * m - _CAP_EPS)))
        log.info("capacity caps ceil(gamma*m) for m=%d: %s", m,
                 ", ".join(f"{p.name}={c}" for p, c in zip(fleet, caps)))
        return mins, caps


def check_feasible(mins: Sequence[int], caps: Sequence[int], m: int) -> None:
    if m == 0:
        raise InfeasibleError("workload is empty")
    if sum(mins) > m:
        raise InfeasibleError(
            f"sum of per-model minimums {sum(mins)} exceeds workload size {m}")
    if sum(caps) < m:
        raise InfeasibleError(f"sum of per-model caps {sum(caps)} is below workload size {m}")
    for k, (lo, hi) in enumerate(zip(mins, caps)):
        if lo > hi:
            raise InfeasibleError(f"model {k}: minimum {lo} exceeds cap {hi}")


def objective_of(cost: np.ndarray, model_of: Sequence[int]) -> float:
    idx = np.asarray(model_of, dtype=np.intp)
    return math.fsum(cost[np.arange(len(idx)), idx].tolist())


def solve_transportation(cost: np.ndarray, mins: Sequence[int], caps: Sequence[int]) -> list[int]:
    """Exact minimum of ``sum C[i, model_of[i]]`` subject to
    ``mins[K] <= |Q_K| <= caps[K]``; returns ``model_of``."""
    cost = np.asarray(cost, dtype=np.float64)
    m, k = cost.shape
    check_feasible(mins, caps, m)
    src, first_model = 0, m + 1
    excess, sink = m + k + 1, m + k + 2
    g = MinCostFlow(m + k + 3)
    for i in range(m):
        g.add_edge(src, 1 + i, 1, 0.0)
    arcs = np.empty((m, k), dtype=np.int64)
    rows = cost.tolist()
    for i in range(m):
        for j in range(k):
            arcs[i, j] = g.add_edge(1 + i, first_model + j, 1, rows[i][j])
    for j in range(k):
        if mins[j] > 0:
            g.add_edge(first_model + j, sink, mins[j], 0.0)
        if caps[j] > mins[j]:
            g.add_edge(first_model + j, excess, caps[j] - mins[j], 0.0)
    g.add_edge(excess, sink, m - sum(mins), 0.0)
    flow, _ = g.solve(src, sink, m)
    if flow < m:
        raise InfeasibleError(f"only {flow} of {m} queries could be placed")
    model_of = []
    for i in range(m):
        used = [j for j in range(k) if g.flow_on(int(arcs[i, j])) == 1]
        assert len(used) == 1, "flow is not integral on query arcs"
        model_of.append(used[0])
    return model_of


def brute_force_transportation(cost: np.ndarray, mins: Sequence[int],
                               caps: Sequence[int]) -> list[int]:
    """Exhaustive search over all ``K**m`` assignments in lexicographic
    order; the first minimum wins."""
    cost = np.asarray(cost, dtype=np.float64)
    m, k = cost.shape
    if k**m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"instance too large for brute force: {k}^{m} > {BRUTE_FORCE_LIMIT}")
    check_feasible(mins, caps, m)
    mins_a, caps_a = np.asarray(mins), np.asarray(caps)
    weights = k ** np.arange(m - 1, -1, -1)
    best_val, best = math.inf, None
    total = k**m
    chunk = 1 << 16
    rows = np.arange(m)
    for start in range(0, total, chunk):
        code = np.arange(start, min(total, start + chunk))
        digits = (code[:, None] // weights[None, :]) % k
        counts = np.stack([(digits == j).sum(axis=1) for j in range(k)], axis=1)
        ok = np.all((counts >= mins_a) & (counts <= caps_a), axis=1)
        if not ok.any():
            continue
        vals = np.where(ok, cost[rows[None, :], digits].sum(axis=1), np.inf)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best = float(vals[i]), digits[i]
    if best is None:
        raise InfeasibleError("no assignment satisfies the constraints")
    return [int(d) for d in best]


# ----------------------------------------------------------------- metrics

@dataclass(frozen=True)
class Metrics:
    total_energy_j: float
    mean_runtime_s: float
    total_accuracy: float
    per_model_counts: dict[str, int]
    objective_value: float


def evaluate(assignment: Assignment, fleet: Sequence[ModelProfile], workload: Workload,
             zeta: float | None = None, normalizers: Normalizers | None = None) -> Metrics:
    """Physical totals of an assignment, and its normalized objective at
    ``zeta`` (NaN when no ``zeta`` is given)."""
    m = len(workload)
    if len(assignment) != m:
        raise ValueError(f"assignment covers {len(assignment)} queries, workload has {m}")
    if assignment.n_models != len(fleet):
        raise ValueError(f"assignment is over {assignment.n_models} models, fleet has {len(fleet)}")
    rows, idx = np.arange(m), assignment.array
    energy = energy_table(fleet, workload)[rows, idx]
    runtime = runtime_table(fleet, workload)[rows, idx]
    accuracy = accuracy_table(fleet, workload)[rows, idx]
    if zeta is None:
        objective = math.nan
    else:
        cm = build_cost_matrix(fleet, workload, zeta, normalizers)
        objective = objective_of(cm.entries, assignment.model_of)
    return Metrics(
        total_energy_j=math.fsum(energy.tolist()),
        mean_runtime_s=math.fsum(runtime.tolist()) / m,
        total_accuracy=math.fsum(accuracy.tolist()),
        per_model_counts={p.name: c for p, c in zip(fleet, assignment.counts)},
        objective_value=objective,
    )


# ----------------------------------------------------------------- solvers

def _solve_with(solver, fleet, workload, zeta, constraints, normalizers):
    fleet = tuple(fleet)
    m = len(workload)
    if m == 0:
        raise InfeasibleError("workload is empty")
    constraints = constraints or RoutingConstraints()
    mins, caps = constraints.bounds(fleet, m)
    check_feasible(mins, caps, m)
    norm = normalizers or compute_normalizers(fleet, workload)
    cm = build_cost_matrix(fleet, workload, zeta, norm)
    assignment = Assignment(tuple(solver(cm.entries, mins, caps)), len(fleet))
    return assignment, evaluate(assignment, fleet, workload, zeta, norm)


def solve_offline(fleet: Sequence[ModelProfile], workload: Workload, zeta: float,
                  constraints: RoutingConstraints | None = None,
                  normalizers: Normalizers | None = None) -> tuple[Assignment, Metrics]:
    """Minimum-cost routing of ``workload`` at trade-off ``zeta`` (0 favours
    accuracy, 1 favours energy). Default constraints require one query per
    model and no caps."""
    return _solve_with(solve_transportation, fleet, workload, zeta, constraints, normalizers)


def brute_force(fleet: Sequence[ModelProfile], workload: Workload, zeta: float,
                constraints: RoutingConstraints | None = None,
                normalizers: Normalizers | None = None) -> tuple[Assignment, Metrics]:
    """Reference solver by enumeration; refuses more than 10**7 candidates."""
    if len(fleet) ** len(workload) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"instance too large for brute force: {len(fleet)}^{len(workload)}")
    return _solve_with(brute_force_transportation, fleet, workload, zeta, constraints, normalizers)


def round_robin(workload: Workload, fleet: Sequence[ModelProfile]) -> Assignment:
    if not fleet:
        raise ValueError("fleet is empty")
    k = len(fleet)
    return Assignment(tuple(i % k for i in range(len(workload))), k)


def random_assign(workload: Workload, fleet: Sequence[ModelProfile], seed: int) -> Assignment:
    """Each query to a uniformly random model, i.i.d., reproducible per seed."""
    if not fleet:
        raise ValueError("fleet is empty")
    rng = np.random.default_rng(seed)
    return Assignment(tuple(rng.integers(0, len(fleet), size=len(workload)).tolist()), len(fleet))


def single_model(workload: Workload, fleet: Sequence[ModelProfile], model_index: int) -> Assignment:
    if not 0 <= model_index < len(fleet):
        raise ValueError(f"model index {model_index} out of range 0..{len(fleet) - 1}")
    return Assignment((model_index,) * len(workload), len(fleet))


# ------------------------------------------------------------------- sweep

@dataclass(frozen=True)
class SweepRow:
    zeta: float
    metrics: Metrics
    assignment: Assignment


def _sweep_point(args):
    fleet, workload, zeta, constraints, norm = args
    assignment, metrics = solve_offline(fleet, workload, zeta, constraints, norm)
    return SweepRow(zeta, metrics, assignment)


def sweep_zeta(fleet: Sequence[ModelProfile], workload: Workload,
               constraints: RoutingConstraints | None, grid: Sequence[float],
               jobs: int = 1) -> list[SweepRow]:
    """Solve once per ``zeta`` in ``grid``; rows come back in grid order.

    Normalizers are shared across the grid, so objectives at different
    ``zeta`` are on one scale.
    """
    grid = [float(z) for z in grid]
    if any(not 0.0 <= z <= 1.0 for z in grid):
        raise ValueError("zeta grid values must lie in [0, 1]")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("zeta grid must be sorted ascending")
    fleet = tuple(fleet)
    norm = compute_normalizers(fleet, workload)
    tasks = [(fleet, workload, z, constraints, norm) for z in grid]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, tasks))
    return [_sweep_point(t) for t in tasks]


def parse_grid(spec: str) -> list[float]:
    """``LO:HI:STEP`` with both ends inclusive, e.g. ``0:1:0.05``."""
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ValueError(f"grid must be LO:HI:STEP, got {spec!r}") from None
    if step <= 0 or hi < lo:
        raise ValueError(f"grid needs STEP > 0 and HI >= LO, got {spec!r}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(n)]

