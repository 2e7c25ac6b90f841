"""Sequential balls-into-bins simulation engine.

Each of ``balls`` steps offers the policy an ordered pair of bins drawn
i.i.d. uniform over ``{0..n-1}`` (the same bin may appear twice), plus one
fair tie-break bit. The policy picks one member of the pair; the engine
maintains the ground-truth loads.

Randomness comes from numpy's Philox bit generator (a counter-based 64-bit
PRNG) keyed by ``SimConfig.seed``. Each run draws exactly three vectors up
front, in this order: first-offered bins, second-offered bins, tie bits.
The fixed layout makes every run bit-replayable from its seed alone,
independent of which branches a policy takes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PAIR_GUARD = 1 << 12  # max n for exhaustive ordered-pair enumeration elsewhere

TRACE_COLUMNS = ("step", "memory_state_id", "bin_a", "bin_b", "chosen")


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one run: n bins, balls thrown, 64-bit seed."""

    n: int
    seed: int = 0
    balls: int | None = None
    record_trace: bool = False

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.balls is None:
            object.__setattr__(self, "balls", self.n)
        if self.balls < 1:
            raise ValueError(f"balls must be >= 1, got {self.balls}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class StepRecord:
    step: int
    memory_state_id: int
    bin_a: int
    bin_b: int
    chosen: int


@dataclass
class RunResult:
    loads: list[int]
    max_load: int
    trace: list[StepRecord] | None = None

    def to_dict(self) -> dict:
        d = {"n": len(self.loads), "max_load": self.max_load, "loads": self.loads}
        if self.trace is not None:
            d["trace"] = [
                [r.step, r.memory_state_id, r.bin_a, r.bin_b, r.chosen]
                for r in self.trace
            ]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "RunResult":
        d = json.loads(s)
        trace = None
        if "trace" in d:
            trace = [StepRecord(*row) for row in d["trace"]]
        return cls(loads=list(d["loads"]), max_load=d["max_load"], trace=trace)


def draw_run_streams(config: SimConfig) -> tuple[list[int], list[int], list[int]]:
    """Draw the run's three random vectors (bin_a, bin_b, tie bits)."""
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    balls, n = config.balls, config.n
    pa = rng.integers(0, n, size=balls, dtype=np.int64).tolist()
    pb = rng.integers(0, n, size=balls, dtype=np.int64).tolist()
    ties = rng.integers(0, 2, size=balls, dtype=np.uint8).tolist()
    return pa, pb, ties


def trial_seed(base_seed: int, trial: int) -> int:
    """Per-trial stream derivation: base seed XOR trial index."""
    return (base_seed ^ trial) & (2**64 - 1)


def simulate_run(config: SimConfig, policy) -> RunResult:
    """Throw ``config.balls`` balls into ``config.n`` bins under ``policy``.

    The policy instance is (re)bound to this run and mutated in place; do
    not share one instance between concurrent runs.
    """
    pa, pb, ties = draw_run_streams(config)
    policy.reset(config.n, config.balls)
    loads = [0] * config.n
    if config.record_trace:
        trace = _run_traced(policy, loads, pa, pb, ties)
    else:
        trace = None
        policy.run_bulk(loads, pa, pb, ties)
    return RunResult(loads=loads, max_load=max(loads), trace=trace)


def simulate_segmented(
    config: SimConfig, policy, boundaries: Sequence[int]
) -> tuple[RunResult, list[list[int]]]:
    """Like simulate_run, but snapshot the loads at the given step counts.

    Streams are drawn once up front, so the result is bit-identical to an
    unsegmented run with the same config. Returns (result, snapshots) with
    one copy of the loads per boundary, in order.
    """
    bounds = list(boundaries)
    if (
        any(b < 1 or b > config.balls for b in bounds)
        or any(y <= x for x, y in zip(bounds, bounds[1:]))
    ):
        raise ValueError(f"boundaries must be strictly increasing and within 1..{config.balls}")
    pa, pb, ties = draw_run_streams(config)
    policy.reset(config.n, config.balls)
    loads = [0] * config.n
    snapshots = []
    prev = 0
    for b in bounds:
        policy.run_bulk(loads, pa[prev:b], pb[prev:b], ties[prev:b])
        snapshots.append(list(loads))
        prev = b
    if prev < config.balls:
        policy.run_bulk(loads, pa[prev:], pb[prev:], ties[prev:])
    return RunResult(loads=loads, max_load=max(loads)), snapshots


def _run_traced(policy, loads, pa, pb, ties) -> list[StepRecord]:
    trace = []
    for t, (a, b, r) in enumerate(zip(pa, pb, ties)):
        sid = policy.state_id()
        c = policy.decide((a, b), r)
        loads[c] += 1
        policy.update((a, b), c)
        trace.append(StepRecord(t, sid, a, b, c))
    return trace


def max_load(loads: Sequence[int]) -> int:
    if len(loads) == 0:
        raise ValueError("empty load vector")
    return max(loads)


def load_histogram(loads: Sequence[int]) -> dict[int, int]:
    """Map load level -> number of bins at that level; counts sum to n."""
    if len(loads) == 0:
        raise ValueError("empty load vector")
    hist: dict[int, int] = {}
    for v in loads:
        hist[v] = hist.get(v, 0) + 1
    return dict(sorted(hist.items()))


def write_trace_csv(trace: Iterable[StepRecord], path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow((r.step, r.memory_state_id, r.bin_a, r.bin_b, r.chosen))


def read_trace_csv(path: str) -> list[StepRecord]:
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header: {header}")
        return [StepRecord(*(int(x) for x in row)) for row in rd]
