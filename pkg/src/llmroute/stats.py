"""No-intercept OLS, balanced two-way ANOVA and the F / Student-t functions
they need.

The distribution functions are built on a continued-fraction regularized
incomplete beta function; no SciPy dependency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import LLMRouteError, MeasurementRecord

BETACF_EPS = 1e-15
BETACF_MAX_ITER = 300
_TINY = 1e-300


class StatsError(LLMRouteError, ValueError):
    pass


class SingularDesignError(StatsError):
    pass


class InsufficientDataError(StatsError):
    pass


# ------------------------------------------------------------ special functions

def _betacf(a: float, b: float, x: float, y: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction; y = 1 - x
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETACF_EPS:
            return h
    raise StatsError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _betainc_pair(a: float, b: float, x: float, y: float) -> tuple[float, float]:
    """Return ``(I_x(a, b), 1 - I_x(a, b))`` with ``y = 1 - x`` supplied by the
    caller so neither tail suffers cancellation."""
    if x <= 0.0:
        return 0.0, 1.0
    if y <= 0.0:
        return 1.0, 0.0
    log_front = (a * math.log(x) + b * math.log(y)
                 + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))
    front = math.exp(log_front)
    if x <= (a + 1.0) / (a + b + 2.0):
        lower = front * _betacf(a, b, x, y) / a
        return lower, 1.0 - lower
    upper = front * _betacf(b, a, y, x) / b
    return 1.0 - upper, upper


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError("betainc requires 0 <= x <= 1")
    return _betainc_pair(a, b, x, 1.0 - x)[0]


def _check_dof(*dofs):
    for d in dofs:
        if d <= 0:
            raise ValueError(f"degrees of freedom must be positive, got {d}")


def f_cdf(x: float, d1: float, d2: float) -> float:
    """CDF of the F(d1, d2) distribution."""
    if x < 0:
        raise ValueError(f"f_cdf requires x >= 0, got {x}")
    _check_dof(d1, d2)
    if math.isinf(x):
        return 1.0
    u, v = d1 * x, d2
    return _betainc_pair(d1 / 2.0, d2 / 2.0, u / (u + v), v / (u + v))[0]


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper tail ``1 - f_cdf``, accurate for tiny p-values."""
    if x < 0:
        raise ValueError(f"f_sf requires x >= 0, got {x}")
    _check_dof(d1, d2)
    if math.isinf(x):
        return 0.0
    u, v = d1 * x, d2
    return _betainc_pair(d1 / 2.0, d2 / 2.0, u / (u + v), v / (u + v))[1]


def _t_tail(t: float, dof: float) -> float:
    # P(T > t) for t >= 0
    t2 = t * t
    return 0.5 * _betainc_pair(dof / 2.0, 0.5, dof / (dof + t2), t2 / (dof + t2))[0]


def t_cdf(t: float, dof: float) -> float:
    _check_dof(dof)
    if t >= 0:
        return 1.0 - _t_tail(t, dof)
    return _t_tail(-t, dof)


def t_quantile(p: float, dof: float) -> float:
    """Inverse CDF of Student's t with ``dof`` degrees of freedom.

    Solved by bisection on the tail probability, so it is antisymmetric
    about ``p = 0.5`` by construction.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"t_quantile requires 0 < p < 1, got {p}")
    _check_dof(dof)
    if p == 0.5:
        return 0.0
    tail = 1.0 - p if p > 0.5 else p
    hi = 1.0
    while _t_tail(hi, dof) > tail:
        hi *= 2.0
        if hi > 1e300:
            raise StatsError("t_quantile bracket overflow")
    lo = 0.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _t_tail(mid, dof) > tail:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    return q if p > 0.5 else -q


# ------------------------------------------------------------------- OLS

@dataclass(frozen=True)
class FitResult:
    """No-intercept fit of ``y ~ c0*tau_in + c1*tau_out + c2*tau_in*tau_out``.

    ``r_squared`` is the uncentered ``1 - RSS / sum(y**2)``; the F statistic
    tests all three coefficients jointly zero on (3, n - 3) degrees of freedom.
    """

    coeffs: tuple[float, float, float]
    r_squared: float
    f_statistic: float
    p_value: float
    stderr: tuple[float, float, float]
    n_obs: int
    rss: float

    @property
    def df_resid(self) -> int:
        return self.n_obs - 3


def design_matrix(tau_in, tau_out) -> np.ndarray:
    tau_in = np.asarray(tau_in, dtype=np.float64)
    tau_out = np.asarray(tau_out, dtype=np.float64)
    return np.column_stack([tau_in, tau_out, tau_in * tau_out])


def _two_product(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Dekker/Veltkamp: a*b == p + e exactly (barring over/underflow)
    p = a * b
    split = 134217729.0  # 2**27 + 1
    ca = split * a
    ah = ca - (ca - a)
    al = a - ah
    cb = split * b
    bh = cb - (cb - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _exact_dot(u: np.ndarray, v: np.ndarray) -> float:
    # correctly rounded, hence independent of row order
    p, e = _two_product(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64))
    return math.fsum(np.concatenate([p, e]).tolist())


def _cholesky_solve(g: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    L = np.zeros_like(g)
    for i in range(n):
        for j in range(i + 1):
            s = g[i, j] - L[i, :j] @ L[j, :j]
            if i == j:
                if s <= 1e-13 * max(g[i, i], _TINY):
                    raise SingularDesignError(
                        "design matrix [tau_in, tau_out, tau_in*tau_out] is rank deficient")
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    z = np.zeros(n)
    for i in range(n):
        z[i] = (b[i] - L[i, :i] @ z[:i]) / L[i, i]
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (z[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


def _cholesky_inverse(g: np.ndarray) -> np.ndarray:
    return np.column_stack([_cholesky_solve(g, e) for e in np.eye(g.shape[0])])


def ols_fit_no_intercept(rows: Iterable[Sequence[float]] | np.ndarray) -> FitResult:
    """Least-squares fit of ``(tau_in, tau_out, y)`` rows with no intercept.

    Normal equations are accumulated exactly (error-free products summed with
    ``math.fsum``) on column-equilibrated regressors and solved by Cholesky,
    followed by two steps of iterative refinement against the true residual.
    """
    data = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 3:
        raise StatsError("rows must be (tau_in, tau_out, response) triples")
    n = data.shape[0]
    if n <= 3:
        raise InsufficientDataError(f"need at least 4 observations for 3 regressors, got {n}")
    if not np.all(np.isfinite(data)):
        raise StatsError("rows contain non-finite values")
    X = design_matrix(data[:, 0], data[:, 1])
    y = data[:, 2]
    cols = [X[:, j] for j in range(3)]
    scale = np.array([math.sqrt(_exact_dot(c, c)) for c in cols])
    if np.any(scale == 0):
        raise SingularDesignError("a regressor column is identically zero")
    Xs = X / scale
    scols = [Xs[:, j] for j in range(3)]
    G = np.array([[_exact_dot(scols[i], scols[j]) for j in range(3)] for i in range(3)])
    rhs = np.array([_exact_dot(c, y) for c in scols])
    beta_s = _cholesky_solve(G, rhs)
    for _ in range(2):
        resid = _residual(Xs, y, beta_s)
        corr = np.array([_exact_dot(c, resid) for c in scols])
        beta_s = beta_s + _cholesky_solve(G, corr)
    resid = _residual(Xs, y, beta_s)
    rss = _exact_dot(resid, resid)
    tss = _exact_dot(y, y)
    coeffs = beta_s / scale

    dof = n - 3
    if tss == 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - rss / tss))
    fitted = y - resid
    ssm = _exact_dot(fitted, fitted)
    if rss == 0.0:
        f, p = (math.inf, 0.0) if ssm > 0 else (0.0, 1.0)
    else:
        f = (ssm / 3.0) / (rss / dof)
        p = f_sf(f, 3, dof)
    sigma2 = rss / dof
    cov_diag = np.diag(_cholesky_inverse(G)) / scale**2
    stderr = np.sqrt(np.maximum(cov_diag * sigma2, 0.0))
    return FitResult(
        coeffs=tuple(float(c) for c in coeffs),
        r_squared=float(r2),
        f_statistic=float(f),
        p_value=float(p),
        stderr=tuple(float(s) for s in stderr),
        n_obs=n,
        rss=float(rss),
    )


def _residual(Xs: np.ndarray, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
    # y - Xs @ beta with each row evaluated via error-free products
    acc = y.copy()
    err = np.zeros_like(y)
    for j in range(3):
        p, e = _two_product(Xs[:, j], np.full_like(y, beta[j]))
        acc, e2 = _two_sum(acc, -p)
        err += e2 - e
    return acc + err


def _two_sum(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def fit_records(records: Iterable[MeasurementRecord], metric: str = "energy") -> dict[str, FitResult]:
    """Fit one model per ``model_name``; ``metric`` is ``energy`` or ``runtime``."""
    attr = _metric_attr(metric)
    grouped: dict[str, list[tuple[float, float, float]]] = {}
    for r in records:
        grouped.setdefault(r.model_name, []).append((r.tau_in, r.tau_out, getattr(r, attr)))
    return {name: ols_fit_no_intercept(rows) for name, rows in grouped.items()}


def _metric_attr(metric: str) -> str:
    try:
        return {"energy": "energy_j", "runtime": "runtime_s"}[metric]
    except KeyError:
        raise ValueError(f"metric must be 'energy' or 'runtime', got {metric!r}") from None


# ------------------------------------------------------------------- ANOVA

@dataclass(frozen=True)
class AnovaRow:
    source: str
    sum_squares: float
    dof: int
    f_statistic: float | None = None
    p_value: float | None = None


@dataclass(frozen=True)
class AnovaTable:
    """Fixed-effects two-way decomposition for a balanced grid.

    ``rows`` are ordered factor A (input tokens), factor B (output tokens),
    interaction (when fitted) and error.
    """

    rows: tuple[AnovaRow, ...]
    ss_total: float
    levels_a: tuple
    levels_b: tuple
    replicates: int

    def __getitem__(self, source: str) -> AnovaRow:
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)


def _f_test(ss: float, dof: int, ms_err: float, dof_err: int) -> tuple[float, float]:
    # SS == 0 reports no effect; MS_err == 0 with SS > 0 is an infinitely significant effect
    if ss == 0.0:
        return 0.0, 1.0
    if ms_err == 0.0:
        return math.inf, 0.0
    f = (ss / dof) / ms_err
    return f, f_sf(f, dof, dof_err)


def two_way_anova(cells, interaction: bool = True, levels_a: Sequence | None = None,
                  levels_b: Sequence | None = None) -> AnovaTable:
    """Two-way ANOVA on ``cells[i, j, k]`` = replicate ``k`` at level ``i`` of
    factor A and level ``j`` of factor B.

    With ``interaction=False`` the interaction sum of squares is pooled into
    the error term, which allows a single replicate per cell.
    """
    y = np.asarray(cells, dtype=np.float64)
    if y.ndim != 3:
        raise StatsError("cells must be a 3-d array (levels_a, levels_b, replicates)")
    a, b, r = y.shape
    if a < 2 or b < 2:
        raise StatsError("each factor needs at least 2 levels")
    if r < 1:
        raise StatsError("each cell needs at least one replicate")
    if interaction and r < 2:
        raise StatsError("no error dof: interaction requires at least 2 replicates per cell")
    grand = y.mean()
    cell_mean = y.mean(axis=2)
    mean_a = y.mean(axis=(1, 2))
    mean_b = y.mean(axis=(0, 2))
    ss_a = float(b * r * np.sum((mean_a - grand) ** 2))
    ss_b = float(a * r * np.sum((mean_b - grand) ** 2))
    inter = cell_mean - mean_a[:, None] - mean_b[None, :] + grand
    ss_ab = float(r * np.sum(inter ** 2))
    ss_err = float(np.sum((y - cell_mean[:, :, None]) ** 2))
    ss_total = float(np.sum((y - grand) ** 2))
    dof_a, dof_b, dof_ab, dof_err = a - 1, b - 1, (a - 1) * (b - 1), a * b * (r - 1)
    if not interaction:
        ss_err, dof_err = ss_err + ss_ab, dof_err + dof_ab
    ms_err = ss_err / dof_err
    rows = [
        AnovaRow("input_tokens", ss_a, dof_a, *_f_test(ss_a, dof_a, ms_err, dof_err)),
        AnovaRow("output_tokens", ss_b, dof_b, *_f_test(ss_b, dof_b, ms_err, dof_err)),
    ]
    if interaction:
        rows.append(AnovaRow("interaction", ss_ab, dof_ab, *_f_test(ss_ab, dof_ab, ms_err, dof_err)))
    rows.append(AnovaRow("error", ss_err, dof_err))
    return AnovaTable(
        rows=tuple(rows),
        ss_total=ss_total,
        levels_a=tuple(levels_a) if levels_a is not None else tuple(range(a)),
        levels_b=tuple(levels_b) if levels_b is not None else tuple(range(b)),
        replicates=r,
    )


def grid_from_records(records: Iterable[MeasurementRecord], metric: str = "energy"):
    """Arrange records into a balanced ``(levels_in, levels_out, replicates)``
    array. Records from all models are pooled."""
    attr = _metric_attr(metric)
    by_cell: dict[tuple[int, int], list[float]] = {}
    for rec in records:
        by_cell.setdefault((rec.tau_in, rec.tau_out), []).append(getattr(rec, attr))
    if not by_cell:
        raise InsufficientDataError("no records")
    lv_a = sorted({k[0] for k in by_cell})
    lv_b = sorted({k[1] for k in by_cell})
    sizes = {len(v) for v in by_cell.values()}
    missing = [(i, j) for i in lv_a for j in lv_b if (i, j) not in by_cell]
    if missing:
        raise StatsError(f"unbalanced design: {len(missing)} empty cell(s), e.g. {missing[0]}")
    if len(sizes) != 1:
        raise StatsError(f"unbalanced design: replicate counts differ across cells {sorted(sizes)}")
    grid = np.array([[by_cell[(i, j)] for j in lv_b] for i in lv_a], dtype=np.float64)
    return grid, lv_a, lv_b


def anova_from_records(records: Iterable[MeasurementRecord], metric: str = "energy",
                       interaction: bool = True) -> AnovaTable:
    grid, lv_a, lv_b = grid_from_records(records, metric)
    return two_way_anova(grid, interaction=interaction, levels_a=lv_a, levels_b=lv_b)

