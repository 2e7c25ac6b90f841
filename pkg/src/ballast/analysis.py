"""Exact probability reconstruction and verification for allocation policies.

Everything here is pure and deterministic. Placement probabilities are
reconstructed by enumerating all n^2 ordered bin pairs and weighting each
policy's per-pair choice distribution; with pair probabilities of 1/n^2 and
choice probabilities in half-units, every p_i is an exact integer numerator
over 2*n^2. All bound checks can therefore run in exact integer or
`fractions.Fraction` arithmetic with zero tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .core import PAIR_GUARD, RunResult, SimConfig, StepRecord, simulate_segmented


# ---------------------------------------------------------------------------
# placement probabilities


@dataclass(frozen=True)
class PlacementProbs:
    """Exact per-bin placement probabilities for one memory state.

    ``numerators[i] / (2 n^2)`` is the probability that the next ball lands
    in bin i given the state the policy was in when this was computed.
    """

    n: int
    memory_state_id: int
    numerators: tuple[int, ...]

    @property
    def denominator(self) -> int:
        return 2 * self.n * self.n

    def fractions(self) -> list[Fraction]:
        d = self.denominator
        return [Fraction(x, d) for x in self.numerators]

    def floats(self) -> list[float]:
        d = self.denominator
        return [x / d for x in self.numerators]


def enumerate_choice_numerators(policy, n: int) -> tuple[list[int], list]:
    """Walk all ordered pairs once; accumulate choice mass per bin.

    Returns (numerators over 2n^2, support violations). A support violation
    is a (pair, bin) where the policy put probability on a bin outside the
    offered pair; legal policies produce none.
    """
    num = [0] * n
    violations = []
    for a in range(n):
        for b in range(n):
            total = 0
            for bin_, halves in policy.choice_dist((a, b)):
                if not 0 <= bin_ < n:
                    raise ValueError(f"choice outside bin range: {bin_}")
                if halves < 0:
                    raise ValueError("negative choice mass")
                num[bin_] += halves
                total += halves
                if bin_ != a and bin_ != b:
                    violations.append(((a, b), bin_))
            if total != 2:
                raise ValueError(f"choice mass for pair ({a},{b}) must total 1")
    return num, violations


def exact_placement_probs(policy, n: int, state=None) -> PlacementProbs:
    """Reconstruct the placement-probability vector by pair enumeration.

    The policy must already be bound to ``n`` bins (via ``reset``) unless a
    ``state`` to restore is supplied, in which case it is rebound first.
    Enumeration is guarded at n <= 4096.
    """
    if n > PAIR_GUARD:
        raise ValueError(f"n={n} exceeds the n^2 enumeration guard ({PAIR_GUARD})")
    if state is not None:
        if getattr(policy, "n", None) != n:
            policy.reset(n, n)
        policy.restore(state)
    elif getattr(policy, "n", None) != n:
        raise ValueError("policy is not bound to this n; reset it or pass a state")
    num, _ = enumerate_choice_numerators(policy, n)
    return PlacementProbs(n=n, memory_state_id=policy.state_id(), numerators=tuple(num))


# ---------------------------------------------------------------------------
# forbidden sets and placement bounds


def as_exact(eps) -> Fraction:
    """Exact value of an epsilon given as Fraction, decimal string, or int ratio."""
    e = Fraction(eps) if not isinstance(eps, Fraction) else eps
    if not 0 < e < 1:
        raise ValueError(f"epsilon must be in (0, 1), got {eps}")
    return e


@dataclass(frozen=True)
class ForbiddenSet:
    """Bins the current memory state starves: p_i strictly below eps/n."""

    epsilon: Fraction
    members: frozenset[int]


def forbidden_set(p: PlacementProbs, epsilon) -> ForbiddenSet:
    eps = as_exact(epsilon)
    q, pe = eps.denominator, eps.numerator
    two_n_p = 2 * p.n * pe
    members = frozenset(i for i, x in enumerate(p.numerators) if q * x < two_n_p)
    return ForbiddenSet(epsilon=eps, members=members)


@dataclass(frozen=True)
class PlacementBoundsReport:
    """Result of the two placement-probability guarantees for one subset.

    subset_ok: P(ball lands in S) >= eps * |S \\ F| / n
    size_ok:   |F| <= eps * n
    """

    epsilon: Fraction
    subset_ok: bool
    size_ok: bool
    lhs: Fraction
    rhs: Fraction
    forbidden_size: int
    forbidden_limit: Fraction


def check_placement_bounds(p: PlacementProbs, epsilon, subset: Iterable[int]) -> PlacementBoundsReport:
    """Exact check of both guarantees for one (state, epsilon, subset)."""
    eps = as_exact(epsilon)
    fs = forbidden_set(p, eps)
    s = set(subset)
    if any(i < 0 or i >= p.n for i in s):
        raise ValueError("subset contains out-of-range bins")
    lhs = Fraction(sum(p.numerators[i] for i in s), p.denominator)
    rhs = eps * len(s - fs.members) / p.n
    limit = eps * p.n
    return PlacementBoundsReport(
        epsilon=eps,
        subset_ok=lhs >= rhs,
        size_ok=len(fs.members) <= limit,
        lhs=lhs,
        rhs=rhs,
        forbidden_size=len(fs.members),
        forbidden_limit=limit,
    )


def default_epsilon_grid() -> tuple[Fraction, ...]:
    """The standard sweep grid: 0.05, 0.10, ..., 0.95 as exact fractions."""
    return tuple(Fraction(k, 20) for k in range(1, 20))


@dataclass
class SweepResult:
    """Outcome of a placement-bounds sweep over many states."""

    policy: str
    n: int
    states_checked: int
    epsilons: list[float]
    n_subsets: int
    subset_violations: int = 0
    size_violations: int = 0
    support_violations: int = 0
    violation_samples: list = field(default_factory=list)
    worst_margins: dict = field(default_factory=dict)  # state_id -> [subset, size]

    @property
    def ok(self) -> bool:
        return not (self.subset_violations or self.size_violations or self.support_violations)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "n": self.n,
            "states_checked": self.states_checked,
            "epsilons": self.epsilons,
            "n_subsets": self.n_subsets,
            "subset_violations": self.subset_violations,
            "size_violations": self.size_violations,
            "support_violations": self.support_violations,
            "violation_samples": self.violation_samples[:50],
            "worst_margins": {str(k): v for k, v in self.worst_margins.items()},
            "ok": self.ok,
        }


def random_subsets(n: int, count: int, seed: int) -> np.ndarray:
    """count x n 0/1 matrix of uniformly random subsets (each bin i.i.d. fair)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    return rng.integers(0, 2, size=(count, n), dtype=np.int64)


def all_subsets(n: int) -> np.ndarray:
    """2^n x n matrix of every subset; only sensible for tiny n."""
    if n > 16:
        raise ValueError("exhaustive subsets only supported for n <= 16")
    rows = np.arange(1 << n, dtype=np.int64)
    return (rows[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1


def sweep_placement_bounds(
    policy,
    n: int,
    states: Iterable,
    epsilons: Sequence = (),
    subsets: np.ndarray | None = None,
    subset_seed: int = 0xF00D,
    n_subsets: int = 1000,
    chunk: int = 2048,
) -> SweepResult:
    """Verify both placement bounds over many states in exact integer math.

    ``states`` yields snapshots restorable by the policy (None entries mean
    "current state as-is"). Every epsilon is taken exactly; violations are
    counted with zero tolerance. Support violations (probability mass
    outside the offered pair) are collected as well, so an illegal policy
    cannot slip through.
    """
    eps_list = [as_exact(e) for e in (epsilons or default_epsilon_grid())]
    if subsets is None:
        subsets = random_subsets(n, n_subsets, subset_seed)
    M = subsets.astype(np.int64, copy=False)
    result = SweepResult(
        policy=getattr(policy, "name", type(policy).__name__),
        n=n,
        states_checked=0,
        epsilons=[float(e) for e in eps_list],
        n_subsets=M.shape[0],
    )

    state_list = list(states)
    for start in range(0, len(state_list), chunk):
        batch = state_list[start : start + chunk]
        nums = np.empty((len(batch), n), dtype=np.int64)
        ids = []
        for j, st in enumerate(batch):
            if st is not None:
                if getattr(policy, "n", None) != n:
                    policy.reset(n, n)
                policy.restore(st)
            num, support = enumerate_choice_numerators(policy, n)
            if support:
                result.support_violations += len(support)
                result.violation_samples.append(
                    {"kind": "support", "state": policy.state_id(), "sample": support[0]}
                )
            nums[j] = num
            ids.append(policy.state_id())

        sums = M @ nums.T  # (n_subsets, batch): choice mass per subset
        margins = np.full((len(batch), 2), np.inf)
        for eps in eps_list:
            q, pe = eps.denominator, eps.numerator
            forbidden = (q * nums) < (2 * n * pe)  # (batch, n)
            fsize = forbidden.sum(axis=1)
            # size bound: |F| <= eps * n, exactly q*|F| <= p*n
            size_bad = q * fsize > pe * n
            for j in np.nonzero(size_bad)[0]:
                result.size_violations += 1
                result.violation_samples.append(
                    {"kind": "size", "state": ids[j], "epsilon": float(eps), "F": int(fsize[j])}
                )
            margins[:, 1] = np.minimum(margins[:, 1], (pe * n - q * fsize) / q)

            # subset bound: q * sum_S num >= 2 n p |S \ F|
            outside = M @ (1 - forbidden.astype(np.int64)).T  # |S \ F| per (subset, state)
            diff = q * sums - (2 * n * pe) * outside
            bad = diff < 0
            nbad = int(bad.sum())
            if nbad:
                result.subset_violations += nbad
                si, sj = np.nonzero(bad)
                result.violation_samples.append(
                    {
                        "kind": "subset",
                        "state": ids[int(sj[0])],
                        "epsilon": float(eps),
                        "subset_index": int(si[0]),
                    }
                )
            margins[:, 0] = np.minimum(
                margins[:, 0], diff.min(axis=0) / (q * 2 * n * n)
            )

        for j, sid in enumerate(ids):
            result.worst_margins[sid] = [float(margins[j, 0]), float(margins[j, 1])]
        result.states_checked += len(batch)

    return result


def enumerate_clustered_states(num_clusters: int, cap: int, max_balls: int):
    """All counter tuples reachable with at most max_balls balls.

    Any composition of k <= max_balls into num_clusters parts (each <= cap)
    is reachable: offering two bins of the same cluster forces that
    cluster's counter up regardless of tie-breaks.
    """

    def rec(prefix, remaining, slots):
        if slots == 1:
            for v in range(min(remaining, cap) + 1):
                yield prefix + (v,)
            return
        for v in range(min(remaining, cap) + 1):
            yield from rec(prefix + (v,), remaining - v, slots - 1)

    yield from rec((), max_balls, num_clusters)


def probe_states(policy, n: int, balls: int, seed: int, max_states: int = 256) -> list:
    """Snapshots of the distinct memory states visited in one seeded run."""
    from .core import draw_run_streams

    config = SimConfig(n=n, seed=seed, balls=balls)
    pa, pb, ties = draw_run_streams(config)
    policy.reset(n, balls)
    seen = {}
    loads = [0] * n
    for a, b, r in zip(pa, pb, ties):
        sid = policy.state_id()
        if sid not in seen:
            seen[sid] = policy.snapshot()
            if len(seen) >= max_states:
                break
        c = policy.decide((a, b), r)
        loads[c] += 1
        policy.update((a, b), c)
    sid = policy.state_id()
    if sid not in seen and len(seen) < max_states:
        seen[sid] = policy.snapshot()
    return list(seen.values())


# ---------------------------------------------------------------------------
# phases


@dataclass(frozen=True)
class PhaseConfig:
    """Split a run of n balls into L phases of floor(n/L) balls each."""

    n: int
    phases: int
    delta: float | None = None

    def __post_init__(self):
        if self.phases < 1:
            raise ValueError("phases must be >= 1")
        if self.phases > self.n:
            raise ValueError("phases must not exceed n")

    @classmethod
    def from_delta(cls, n: int, delta: float) -> "PhaseConfig":
        b = theoretical_bounds(n, delta)
        return cls(n=n, phases=max(1, math.floor(b.lower_L)), delta=delta)

    @property
    def epsilon(self) -> Fraction:
        return Fraction(1, 2 * self.phases)

    @property
    def phase_size(self) -> int:
        return self.n // self.phases

    def threshold(self, i: int) -> Fraction:
        """Growth floor for phase i: (eps/(4L))^i * n/2."""
        ratio = self.epsilon / (4 * self.phases)  # = 1/(8 L^2)
        return ratio**i * Fraction(self.n, 2)

    def failure_bound(self, i: int) -> float:
        """Chernoff-style failure probability 2 * 2^(-(eps/(4L))^i n / 8).

        Astronomically loose at simulatable n; reported for context only.
        """
        ratio = self.epsilon / (4 * self.phases)
        exponent = float(ratio**i) * self.n / 8.0
        return min(1.0, 2.0 * 2.0 ** (-exponent))


@dataclass
class PhaseReport:
    """Observed |S_i| per phase against the geometric thresholds.

    S_i is the set of bins holding at least i balls at the end of phase i;
    snapshots are taken at different times and are not nested sets.
    """

    n: int
    phases: int
    phase_size: int
    epsilon: float
    sizes: list[int]
    thresholds: list[float]
    passes: list[bool]
    failure_bounds: list[float]
    forbidden_overlap: list[int] | None = None
    states_seen: int | None = None

    @property
    def all_passed(self) -> bool:
        return all(self.passes)

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "phases": self.phases,
            "phase_size": self.phase_size,
            "epsilon": self.epsilon,
            "log_base": 2,
            "rows": [
                {
                    "phase": i + 1,
                    "size": self.sizes[i],
                    "threshold": self.thresholds[i],
                    "passed": self.passes[i],
                    "failure_bound": self.failure_bounds[i],
                }
                for i in range(self.phases)
            ],
            "all_passed": self.all_passed,
        }
        if self.forbidden_overlap is not None:
            for i, row in enumerate(d["rows"]):
                row["forbidden_overlap"] = self.forbidden_overlap[i]
            d["states_seen"] = self.states_seen
        return d


def _report_from_sizes(pc: PhaseConfig, sizes: list[int]) -> PhaseReport:
    thresholds = [pc.threshold(i) for i in range(1, pc.phases + 1)]
    passes = [sizes[i] >= thresholds[i] for i in range(pc.phases)]
    return PhaseReport(
        n=pc.n,
        phases=pc.phases,
        phase_size=pc.phase_size,
        epsilon=float(pc.epsilon),
        sizes=sizes,
        thresholds=[float(t) for t in thresholds],
        passes=passes,
        failure_bounds=[pc.failure_bound(i) for i in range(1, pc.phases + 1)],
    )


def phase_report(source, pc: PhaseConfig, n: int | None = None) -> PhaseReport:
    """Phase sizes from a stored trace (a RunResult with trace, a list of
    StepRecords, or a plain sequence of chosen bins)."""
    if isinstance(source, RunResult):
        if source.trace is None:
            raise ValueError("RunResult has no trace; use run_phase_report instead")
        chosen = [r.chosen for r in source.trace]
        n = len(source.loads)
    elif source and isinstance(source[0], StepRecord):
        chosen = [r.chosen for r in source]
    else:
        chosen = list(source)
    if n is None:
        raise ValueError("n is required when passing a bare trace")
    if n != pc.n:
        raise ValueError("phase config n does not match the trace's n")
    needed = pc.phases * pc.phase_size
    if len(chosen) < needed:
        raise ValueError(f"trace too short: {len(chosen)} < {needed} balls")
    loads = [0] * n
    sizes = []
    for i in range(1, pc.phases + 1):
        for t in range((i - 1) * pc.phase_size, i * pc.phase_size):
            loads[chosen[t]] += 1
        sizes.append(sum(1 for v in loads if v >= i))
    return _report_from_sizes(pc, sizes)


def run_phase_report(config: SimConfig, policy, pc: PhaseConfig) -> tuple[PhaseReport, RunResult]:
    """Run the simulation and compute phase sizes at the phase boundaries.

    Balls beyond phases*phase_size are still thrown; they just fall outside
    the phase accounting. Bit-identical to simulate_run for the same config.
    """
    if pc.n != config.n:
        raise ValueError("phase config n does not match the run config")
    needed = pc.phases * pc.phase_size
    if config.balls < needed:
        raise ValueError(f"run too short for {pc.phases} phases: needs {needed} balls")
    boundaries = [i * pc.phase_size for i in range(1, pc.phases + 1)]
    result, snapshots = simulate_segmented(config, policy, boundaries)
    sizes = [sum(1 for v in snap if v >= i + 1) for i, snap in enumerate(snapshots)]
    return _report_from_sizes(pc, sizes), result


def forbidden_union_over_trace(policy, trace: Sequence[StepRecord], n: int, epsilon):
    """Union of forbidden sets over the distinct memory states a run visited.

    Replays the trace through a fresh policy binding; needs the enumeration
    guard (n <= 4096). Returns (union set, number of distinct states).
    """
    eps = as_exact(epsilon)
    policy.reset(n, max(len(trace), 1))
    seen = set()
    union: set[int] = set()
    for rec in trace:
        sid = policy.state_id()
        if sid not in seen:
            seen.add(sid)
            probs = exact_placement_probs(policy, n)
            union |= forbidden_set(probs, eps).members
        policy.update((rec.bin_a, rec.bin_b), rec.chosen)
    return union, len(seen)


def phase_report_with_forbidden(
    policy, trace: Sequence[StepRecord], pc: PhaseConfig, epsilon=None
) -> PhaseReport:
    """Phase report plus the worst observed forbidden-set overlap per phase.

    For each phase i reports |S_i \\ U| where U is the union of forbidden
    sets over every distinct memory state the run visited -- a harsher
    subtraction than any single state's forbidden set.
    """
    eps = as_exact(epsilon if epsilon is not None else pc.epsilon)
    report = phase_report(list(trace), pc, n=pc.n)
    union, nstates = forbidden_union_over_trace(policy, trace, pc.n, eps)
    loads = [0] * pc.n
    overlap = []
    for i in range(1, pc.phases + 1):
        for t in range((i - 1) * pc.phase_size, i * pc.phase_size):
            loads[trace[t].chosen] += 1
        s_i = {b for b in range(pc.n) if loads[b] >= i}
        overlap.append(len(s_i - union))
    report.forbidden_overlap = overlap
    report.states_seen = nstates
    return report


# ---------------------------------------------------------------------------
# closed-form bounds and tails


@dataclass(frozen=True)
class TheoreticalBounds:
    """Closed-form reference quantities for a given n and delta (base-2 logs).

    lower_L: max-load floor forced on any n^(1-delta)-bit policy.
    upper_T: overload threshold for the advice scheme (= 4 * lower_L).
    epsilon: 1 / (2 lower_L).
    advice_list_bound: n^delta / (2 log2 n), the nominal overloaded-bin count.
    """

    n: int
    delta: float
    lower_L: float
    upper_T: float
    epsilon: float
    advice_list_bound: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "lower_L": self.lower_L,
            "upper_T": self.upper_T,
            "epsilon": self.epsilon,
            "advice_list_bound": self.advice_list_bound,
            "log_base": 2,
        }


def theoretical_bounds(n: int, delta: float) -> TheoreticalBounds:
    if n < 4:
        raise ValueError("n must be >= 4 so that log2 log2 n >= 1")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    log_n = math.log2(n)
    loglog_n = math.log2(log_n)
    lower = (delta / 2) * log_n / loglog_n
    upper = (2 * delta) * log_n / loglog_n
    return TheoreticalBounds(
        n=n,
        delta=delta,
        lower_L=lower,
        upper_T=upper,
        epsilon=1 / (2 * lower),
        advice_list_bound=n**delta / (2 * log_n),
    )


def advice_threshold(n: int, delta: float) -> int:
    """Integer overload threshold used by the advice policy: ceil(upper_T)."""
    return max(1, math.ceil(theoretical_bounds(n, delta).upper_T))


@dataclass(frozen=True)
class PoissonTail:
    """Pr(X >= t) for Poisson X, with the single-term approximation
    e^-lambda lambda^t / t! alongside."""

    lam: float
    t: int
    probability: float
    leading_term: float


def poisson_upper_tail(lam: float, t: int) -> PoissonTail:
    """Upper tail by complementing the partial CDF sum.

    The pmf follows the stable recurrence p_k = p_{k-1} * lam / k; tiny
    negative complements from rounding clamp to 0.
    """
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    if t < 0 or int(t) != t:
        raise ValueError("t must be a non-negative integer")
    t = int(t)
    pmf = math.exp(-lam)
    cdf = 0.0
    for k in range(t):
        if k > 0:
            pmf *= lam / k
        cdf += pmf
    tail = 1.0 - cdf
    if tail < 0.0:
        tail = 0.0
    leading = math.exp(-lam + t * math.log(lam) - math.lgamma(t + 1))
    return PoissonTail(lam=lam, t=t, probability=tail, leading_term=leading)


@dataclass(frozen=True)
class AdviceSizeReport:
    """How the final count of overloaded bins compares to the nominal bound."""

    n: int
    delta: float
    threshold: float
    count_over_threshold: int
    bound: float
    ok: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "threshold": self.threshold,
            "count_over_threshold": self.count_over_threshold,
            "bound": self.bound,
            "ok": self.ok,
        }


def advice_list_size_check(loads: Sequence[int], n: int, delta: float) -> AdviceSizeReport:
    """Count bins at or above the overload threshold and compare to the
    nominal n^delta/(2 log2 n) bound. Advisory: the bound is an asymptotic
    statement, so failures are reported, not raised."""
    if len(loads) != n:
        raise ValueError("loads length does not match n")
    b = theoretical_bounds(n, delta)
    count = sum(1 for v in loads if v >= b.upper_T)
    return AdviceSizeReport(
        n=n,
        delta=delta,
        threshold=b.upper_T,
        count_over_threshold=count,
        bound=b.advice_list_bound,
        ok=count <= b.advice_list_bound,
    )
