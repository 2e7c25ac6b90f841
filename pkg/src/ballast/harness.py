"""Seeded experiment harness: scaling scans over (policy, n, trial) grids.

A scan is fully determined by its spec: trial seeds derive from the base
seed XOR the trial index, rows are canonically sorted before emission, and
the emitted bytes are identical across repeat runs. Wall-clock runtimes are
only written when explicitly requested, since they would break that
byte-level determinism.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .analysis import advice_threshold, theoretical_bounds
from .core import SimConfig, simulate_run, trial_seed
from .policies import Policy, make_policy, memory_bits

CSV_COLUMNS = (
    "policy",
    "n",
    "delta",
    "trial",
    "seed",
    "max_load",
    "memory_bits",
    "lower_L",
    "upper_T",
    "runtime_ms",
)


@dataclass(frozen=True)
class PolicySpec:
    """A policy name plus explicit parameters, as named in scan output."""

    name: str
    params: tuple[tuple[str, int], ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "PolicySpec":
        d = dict(d)
        name = d.pop("name")
        return cls(name=name, params=tuple(sorted(d.items())))

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.name}[{inner}]"

    def build(self, n: int, delta: float) -> Policy:
        params = dict(self.params)
        if self.name == "advice" and "threshold" not in params:
            params["threshold"] = advice_threshold(n, delta)
        return make_policy(self.name, **params)


@dataclass(frozen=True)
class ExperimentSpec:
    """A scaling scan: which policies, which n values, how many trials."""

    n_values: tuple[int, ...]
    policies: tuple[PolicySpec, ...]
    delta: float = 0.5
    trials: int = 1
    base_seed: int = 0
    output_path: str | None = None
    format: str = "csv"
    measure_runtime: bool = False

    def __post_init__(self):
        if not self.n_values:
            raise ValueError("n_values must be non-empty")
        if any(n < 4 for n in self.n_values):
            raise ValueError("every n must be >= 4")
        if not self.policies:
            raise ValueError("policies must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if self.format not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.format!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        pols = tuple(PolicySpec.from_dict(p) for p in d.pop("policies"))
        ns = tuple(int(n) for n in d.pop("n_values"))
        return cls(n_values=ns, policies=pols, **d)


@dataclass
class ScalingRow:
    policy: str
    n: int
    delta: float
    trial: int
    seed: int
    max_load: int
    memory_bits: int
    lower_L: float
    upper_T: float
    runtime_ms: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingRow":
        return cls(**{k: d[k] for k in CSV_COLUMNS})


def run_trial(
    spec_policy: PolicySpec, n: int, delta: float, trial: int, base_seed: int,
    measure_runtime: bool = False,
) -> ScalingRow:
    """One simulation, one row."""
    seed = trial_seed(base_seed, trial)
    config = SimConfig(n=n, seed=seed)
    policy = spec_policy.build(n, delta)
    t0 = time.perf_counter() if measure_runtime else 0.0
    result = simulate_run(config, policy)
    elapsed_ms = (time.perf_counter() - t0) * 1000.0 if measure_runtime else 0.0
    b = theoretical_bounds(n, delta)
    return ScalingRow(
        policy=spec_policy.label,
        n=n,
        delta=delta,
        trial=trial,
        seed=seed,
        max_load=result.max_load,
        memory_bits=memory_bits(policy, config),
        lower_L=b.lower_L,
        upper_T=b.upper_T,
        runtime_ms=elapsed_ms,
    )


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[ScalingRow]:
    """All (policy, n, trial) rows of a scan, canonically sorted.

    Trials are independent (seed = base_seed XOR trial), so jobs > 1 runs
    them in worker processes; ordering of the output never depends on it.
    """
    tasks = [
        (ps, n, spec.delta, t, spec.base_seed, spec.measure_runtime)
        for ps in spec.policies
        for n in spec.n_values
        for t in range(spec.trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_trial_star, tasks, chunksize=1))
    else:
        rows = [run_trial(*t) for t in tasks]
    rows.sort(key=lambda r: (r.policy, r.n, r.trial))
    return rows


def _run_trial_star(args):
    return run_trial(*args)


def emit(rows: list[ScalingRow], format: str, path: str) -> None:
    """Write rows as CSV (fixed header, RFC-4180 quoting) or a JSON array.

    Refuses empty input before touching the filesystem.
    """
    if not rows:
        raise ValueError("no rows to emit")
    if format == "csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in rows:
                w.writerow([getattr(r, k) for k in CSV_COLUMNS])
    elif format == "json":
        with open(path, "w") as f:
            json.dump([r.to_dict() for r in rows], f, indent=1)
            f.write("\n")
    else:
        raise ValueError(f"unknown format: {format!r}")


def read_rows_json(path: str) -> list[ScalingRow]:
    with open(path) as f:
        return [ScalingRow.from_dict(d) for d in json.load(f)]


def load_spec_file(path: str) -> dict:
    """Raw spec dict from a JSON file; flag overrides happen at the CLI."""
    with open(path) as f:
        return json.load(f)
