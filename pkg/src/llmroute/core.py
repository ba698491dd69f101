"""Domain types, ingestion of workloads/profiles/measurements, synthetic workloads.

Everything here is immutable after construction. Parsers accept ``bytes``,
``str`` or an open (text or binary) file object.
"""
from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Sequence, Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

Source = Union[bytes, str, IO[bytes], IO[str]]

WORKLOAD_HEADER = ("tau_in", "tau_out")
MEASUREMENT_HEADER = ("model", "tau_in", "tau_out", "energy_j", "runtime_s", "trial")
GAMMA_TOLERANCE = 1e-9


class LLMRouteError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(LLMRouteError, ValueError):
    """Malformed input document. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ProfileError(ParseError):
    pass


class InfeasibleError(LLMRouteError, ValueError):
    """Routing constraints admit no assignment."""


@dataclass(frozen=True)
class Query:
    tau_in: int
    tau_out: int

    def __post_init__(self):
        for name in ("tau_in", "tau_out"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {v!r}")
            if v < 0:
                raise ValueError(f"{name} must be nonnegative, got {v}")
            object.__setattr__(self, name, int(v))

    @property
    def is_empty(self) -> bool:
        return self.tau_in == 0 and self.tau_out == 0


@dataclass(frozen=True)
class Workload:
    """Ordered multiset of queries; a query's identity is its position."""

    queries: tuple[Query, ...]

    def __post_init__(self):
        qs = tuple(q if isinstance(q, Query) else Query(*q) for q in self.queries)
        for i, q in enumerate(qs):
            if q.is_empty:
                raise ValueError(f"query {i} is (0, 0); empty queries cannot be routed")
        object.__setattr__(self, "queries", qs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[int]]) -> "Workload":
        return cls(tuple(Query(int(a), int(b)) for a, b in pairs))

    def __len__(self) -> int:
        return len(self.queries)

    def __getitem__(self, i):
        return self.queries[i]

    def __iter__(self):
        return iter(self.queries)

    @cached_property
    def tau_in(self) -> np.ndarray:
        arr = np.array([q.tau_in for q in self.queries], dtype=np.float64)
        arr.flags.writeable = False
        return arr

    @cached_property
    def tau_out(self) -> np.ndarray:
        arr = np.array([q.tau_out for q in self.queries], dtype=np.float64)
        arr.flags.writeable = False
        return arr

    def subset(self, indices: Iterable[int]) -> "Workload":
        return Workload(tuple(self.queries[i] for i in indices))


@dataclass(frozen=True)
class ModelProfile:
    """One hosted model: accuracy constant (percent), energy and runtime
    coefficients for ``c0*tau_in + c1*tau_out + c2*tau_in*tau_out``, and an
    optional capacity fraction of the workload."""

    name: str
    accuracy_const: float
    energy_coeffs: tuple[float, float, float]
    runtime_coeffs: tuple[float, float, float]
    capacity_fraction: float | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("profile name must be nonempty")
        a = float(self.accuracy_const)
        if not (0.0 < a <= 100.0):
            raise ValueError(f"{self.name}: accuracy_const must be in (0, 100], got {a}")
        object.__setattr__(self, "accuracy_const", a)
        for attr in ("energy_coeffs", "runtime_coeffs"):
            c = tuple(float(x) for x in getattr(self, attr))
            if len(c) != 3 or not all(math.isfinite(x) for x in c):
                raise ValueError(f"{self.name}: {attr} must be three finite reals")
            object.__setattr__(self, attr, c)
        g = self.capacity_fraction
        if g is not None:
            g = float(g)
            if not (0.0 < g <= 1.0):
                raise ValueError(f"{self.name}: capacity_fraction must be in (0, 1], got {g}")
            object.__setattr__(self, "capacity_fraction", g)


def validate_fleet(fleet: Sequence[ModelProfile]) -> tuple[ModelProfile, ...]:
    """Check name uniqueness and, when every profile carries one, that the
    capacity fractions sum to one."""
    fleet = tuple(fleet)
    if not fleet:
        raise ProfileError("fleet is empty")
    seen = set()
    for p in fleet:
        if p.name in seen:
            raise ProfileError(f"duplicate profile name {p.name!r}")
        seen.add(p.name)
    gammas = [p.capacity_fraction for p in fleet]
    if all(g is not None for g in gammas):
        total = math.fsum(gammas)
        if abs(total - 1.0) > GAMMA_TOLERANCE:
            raise ProfileError(f"capacity fractions sum to {total:.12g}, expected 1")
    return fleet


@dataclass(frozen=True)
class Assignment:
    """Total map from query index to model index.

    ``model_of[i]`` is the model serving query ``i``; the per-model query sets
    therefore form a partition of the workload by construction.
    """

    model_of: tuple[int, ...]
    n_models: int

    def __post_init__(self):
        mo = tuple(int(k) for k in self.model_of)
        if self.n_models < 1:
            raise ValueError("n_models must be positive")
        for i, k in enumerate(mo):
            if not 0 <= k < self.n_models:
                raise ValueError(f"query {i} mapped to model {k}, outside 0..{self.n_models - 1}")
        object.__setattr__(self, "model_of", mo)

    def __len__(self) -> int:
        return len(self.model_of)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.array(self.model_of, dtype=np.intp)
        arr.flags.writeable = False
        return arr

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(np.bincount(self.array, minlength=self.n_models).tolist())

    def groups(self) -> list[tuple[int, ...]]:
        out: list[list[int]] = [[] for _ in range(self.n_models)]
        for i, k in enumerate(self.model_of):
            out[k].append(i)
        return [tuple(g) for g in out]


@dataclass(frozen=True)
class MeasurementRecord:
    model_name: str
    tau_in: int
    tau_out: int
    energy_j: float
    runtime_s: float
    trial: int = 1

    def __post_init__(self):
        if self.tau_in < 0 or self.tau_out < 0:
            raise ValueError("token counts must be nonnegative")
        for name in ("energy_j", "runtime_s"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
            object.__setattr__(self, name, v)
        if self.trial < 1:
            raise ValueError("trial must be >= 1")


# ---------------------------------------------------------------- ingestion

def _read_text(source: Source) -> str:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, (bytes, bytearray)):
        try:
            return bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from None
    return source


def _csv_rows(text: str, header: Sequence[str]):
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise ParseError("empty document", line=1) from None
    if tuple(c.strip() for c in first) != tuple(header):
        raise ParseError(f"expected header {','.join(header)!r}, got {','.join(first)!r}", line=1)
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num)
        yield reader.line_num, row


def _nonneg_int(text: str, what: str, line: int) -> int:
    try:
        v = int(text.strip())
    except ValueError:
        raise ParseError(f"{what} is not an integer: {text!r}", line=line) from None
    if v < 0:
        raise ParseError(f"{what} is negative: {v}", line=line)
    return v


def parse_workload(source: Source) -> Workload:
    """Parse a ``tau_in,tau_out`` CSV into a workload, preserving row order."""
    queries = []
    for line, (a, b) in _csv_rows(_read_text(source), WORKLOAD_HEADER):
        q = Query(_nonneg_int(a, "tau_in", line), _nonneg_int(b, "tau_out", line))
        if q.is_empty:
            raise ParseError("query (0, 0) rejected: it has zero cost under every model", line=line)
        queries.append(q)
    return Workload(tuple(queries))


def serialize_workload(workload: Workload) -> str:
    lines = [",".join(WORKLOAD_HEADER)]
    lines += [f"{q.tau_in},{q.tau_out}" for q in workload]
    return "\n".join(lines) + "\n"


def parse_measurements(source: Source) -> list[MeasurementRecord]:
    out = []
    for line, row in _csv_rows(_read_text(source), MEASUREMENT_HEADER):
        name = row[0].strip()
        if not name:
            raise ParseError("empty model name", line=line)
        tin = _nonneg_int(row[1], "tau_in", line)
        tout = _nonneg_int(row[2], "tau_out", line)
        try:
            energy, runtime = float(row[3]), float(row[4])
        except ValueError:
            raise ParseError("energy_j/runtime_s must be real numbers", line=line) from None
        trial = _nonneg_int(row[5], "trial", line)
        try:
            out.append(MeasurementRecord(name, tin, tout, energy, runtime, trial))
        except ValueError as exc:
            raise ParseError(str(exc), line=line) from None
    return out


def serialize_measurements(records: Iterable[MeasurementRecord]) -> str:
    lines = [",".join(MEASUREMENT_HEADER)]
    for r in records:
        lines.append(f"{r.model_name},{r.tau_in},{r.tau_out},{r.energy_j!r},{r.runtime_s!r},{r.trial}")
    return "\n".join(lines) + "\n"


_PROFILE_KEYS = {"name", "accuracy_const", "alpha", "beta", "gamma", "synthetic", "note"}


def parse_profiles(source: Source) -> tuple[ModelProfile, ...]:
    """Parse a profile document.

    The document is TOML with one ``[[model]]`` table per hosted model::

        [[model]]
        name = "Llama-2 (7B)"
        accuracy_const = 50.97
        alpha = [0.05, 1.5, 2.0e-4]   # energy, J/token, J/token, J/token^2
        beta = [1e-4, 0.02, 1e-6]     # runtime, s/token, s/token, s/token^2
        gamma = 0.05                  # optional capacity fraction
    """
    text = _read_text(source)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ProfileError(f"invalid profile document: {exc}") from None
    blocks = doc.get("model")
    if not isinstance(blocks, list) or not blocks:
        raise ProfileError("profile document has no [[model]] blocks")
    fleet = []
    for i, block in enumerate(blocks):
        label = block.get("name", f"model #{i}")
        unknown = set(block) - _PROFILE_KEYS
        if unknown:
            raise ProfileError(f"{label}: unknown field(s) {sorted(unknown)}")
        for key in ("name", "accuracy_const", "alpha", "beta"):
            if key not in block:
                raise ProfileError(f"{label}: missing field {key!r}")
        for key in ("alpha", "beta"):
            if not isinstance(block[key], list) or len(block[key]) != 3:
                raise ProfileError(f"{label}: {key} must be a list of three numbers")
        try:
            fleet.append(ModelProfile(
                name=str(block["name"]),
                accuracy_const=block["accuracy_const"],
                energy_coeffs=tuple(block["alpha"]),
                runtime_coeffs=tuple(block["beta"]),
                capacity_fraction=block.get("gamma"),
            ))
        except (TypeError, ValueError) as exc:
            raise ProfileError(str(exc)) from None
    return validate_fleet(fleet)


def serialize_profiles(fleet: Iterable[ModelProfile]) -> str:
    chunks = []
    for p in fleet:
        lines = [
            "[[model]]",
            f"name = {_toml_str(p.name)}",
            f"accuracy_const = {p.accuracy_const!r}",
            f"alpha = [{', '.join(repr(c) for c in p.energy_coeffs)}]",
            f"beta = [{', '.join(repr(c) for c in p.runtime_coeffs)}]",
        ]
        if p.capacity_fraction is not None:
            lines.append(f"gamma = {p.capacity_fraction!r}")
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"


def _toml_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def load_bundled_profiles(name: str = "open_models") -> tuple[ModelProfile, ...]:
    """Load one of the profile documents shipped in ``llmroute/data``:
    ``open_models`` (all seven models) or ``case_study`` (three Llama-2 sizes
    with capacity fractions)."""
    from importlib.resources import files

    return parse_profiles((files("llmroute") / "data" / f"{name}.profile").read_bytes())


# ------------------------------------------------------- synthetic workloads

@dataclass(frozen=True)
class Uniform:
    """Integer token counts uniform on ``[lo, hi]`` inclusive."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 1:
            raise ValueError(f"uniform lower bound must be >= 1, got {self.lo}")
        if self.lo > self.hi:
            raise ValueError(f"uniform bounds reversed: lo={self.lo} > hi={self.hi}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.integers(self.lo, self.hi, endpoint=True, size=n)


@dataclass(frozen=True)
class LogNormal:
    """``round(exp(N(mu, sigma)))`` truncated (by rejection) to ``[1, cap]``."""

    mu: float
    sigma: float
    cap: int = field(default=4096)

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError(f"lognormal cap must be >= 1, got {self.cap}")
        if self.sigma < 0:
            raise ValueError("lognormal sigma must be nonnegative")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty(0, dtype=np.int64)
        for _ in range(1000):
            need = n - out.size
            if need == 0:
                return out
            draw = np.rint(rng.lognormal(self.mu, self.sigma, size=max(need, 16)))
            keep = draw[(draw >= 1) & (draw <= self.cap)].astype(np.int64)
            out = np.concatenate([out, keep[:need]])
        raise ValueError(f"{self} rejects almost every draw; check mu/sigma against cap")


TokenDist = Union[Uniform, LogNormal]


def parse_dist(spec: str) -> TokenDist:
    """``uniform:LO,HI`` or ``lognormal:MU,SIGMA,CAP``."""
    kind, _, args = spec.partition(":")
    parts = [a for a in args.split(",") if a.strip()]
    try:
        if kind == "uniform" and len(parts) == 2:
            return Uniform(int(parts[0]), int(parts[1]))
        if kind == "lognormal" and len(parts) in (2, 3):
            cap = int(parts[2]) if len(parts) == 3 else 4096
            return LogNormal(float(parts[0]), float(parts[1]), cap)
    except ValueError as exc:
        raise ParseError(f"bad distribution {spec!r}: {exc}") from None
    raise ParseError(f"bad distribution {spec!r}; expected uniform:LO,HI or lognormal:MU,SIGMA,CAP")


def generate_workload(count: int, dist: TokenDist, seed: int,
                      dist_out: TokenDist | None = None) -> Workload:
    """Draw ``count`` queries with independent input/output token counts.

    ``dist`` is used for both counts unless ``dist_out`` is given. The result
    depends only on the arguments.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(np.uint64(seed % 2**64))
    tin = dist.sample(rng, count)
    tout = (dist_out or dist).sample(rng, count)
    return Workload(tuple(Query(int(a), int(b)) for a, b in zip(tin, tout)))


POWERS_OF_TWO_GRID = tuple(2**k for k in range(3, 12))  # 8 .. 2048


def synthesize_measurements(fleet: Sequence[ModelProfile], levels: Sequence[int] = POWERS_OF_TWO_GRID,
                            trials: int = 1, noise: float = 0.0, seed: int = 0,
                            levels_out: Sequence[int] | None = None) -> list[MeasurementRecord]:
    """Measurement records on a full ``levels x levels_out`` token grid,
    generated from each profile's own coefficients.

    Each energy and runtime value is multiplied by ``1 + noise * N(0, 1)``
    (clipped at zero), independently per record.
    """
    rng = np.random.default_rng(seed)
    levels_out = levels if levels_out is None else levels_out
    out = []
    for p in fleet:
        for tin in levels:
            for tout in levels_out:
                e0 = p.energy_coeffs[0] * tin + p.energy_coeffs[1] * tout + p.energy_coeffs[2] * tin * tout
                r0 = p.runtime_coeffs[0] * tin + p.runtime_coeffs[1] * tout + p.runtime_coeffs[2] * tin * tout
                for t in range(1, trials + 1):
                    e = e0 * (1.0 + noise * rng.standard_normal()) if noise else e0
                    r = r0 * (1.0 + noise * rng.standard_normal()) if noise else r0
                    out.append(MeasurementRecord(p.name, int(tin), int(tout), max(e, 0.0), max(r, 0.0), t))
    return out
