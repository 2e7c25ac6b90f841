"""Allocation policies with explicit memory budgets.

Every policy picks one bin from each offered ordered pair. What
distinguishes them is what they are allowed to remember between balls:

* ``one-choice``      -- nothing; always takes the first offered bin.
* ``greedy``          -- the full load vector (the full-knowledge baseline).
* ``clustered``       -- one saturating counter per cluster of bins.
* ``advice``          -- no persistent memory; before every ball it receives
                         the exact list of bins at or above a threshold,
                         with their counts.
* ``max-index`` / ``min-index`` -- stateless toys for verification sweeps.
* ``illegal-fixture`` -- negative control that places outside the offered
                         pair; exists so the verifier can prove it catches
                         rule-breaking policies.

Tie-breaks consume the engine's per-step tie bit: bit 0 keeps the first
offered bin, bit 1 takes the second. ``choice_dist`` exposes each policy's
exact per-pair choice distribution (probabilities in half-units, so a fair
tie is ``(bin_a, 1), (bin_b, 1)``) for the enumeration-based analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def int_width(maxval: int) -> int:
    """Bits needed to store any integer in 0..maxval."""
    if maxval < 0:
        raise ValueError("maxval must be >= 0")
    return max(1, math.ceil(math.log2(maxval + 1)))


class Policy:
    """Base class: a decision rule plus a memory-update rule.

    Instances are single-run-owned and mutable; constructors are cheap and
    a fresh instance should be used per run.
    """

    name = "abstract"

    def reset(self, n: int, balls: int) -> None:
        self.n = n
        self.balls = balls

    def decide(self, pair: tuple[int, int], tie_bit: int) -> int:
        raise NotImplementedError

    def update(self, pair: tuple[int, int], chosen: int) -> None:
        pass

    def run_bulk(self, loads, pa, pb, ties) -> None:
        """Apply all steps of a run. Must match decide/update exactly."""
        for a, b, r in zip(pa, pb, ties):
            c = self.decide((a, b), r)
            loads[c] += 1
            self.update((a, b), c)

    # -- introspection for analysis ------------------------------------

    def state_id(self) -> int:
        return 0

    def snapshot(self):
        return ()

    def restore(self, state) -> None:
        if state:
            raise ValueError(f"{self.name} policy has no memory state")

    def choice_dist(self, pair: tuple[int, int]):
        """Exact choice distribution for the current memory state.

        Returns ((bin, halves), ...) where halves/2 is the probability of
        choosing that bin; halves sum to 2.
        """
        raise NotImplementedError(f"{self.name} does not expose its choice distribution")

    def memory_bits(self, n: int, balls: int) -> int:
        """Declared persistent-memory budget in bits."""
        raise NotImplementedError

    def state_space_size(self, n: int, balls: int) -> int | None:
        """Number of reachable memory states; None if unbounded-declared."""
        return 1


class OneChoicePolicy(Policy):
    """Ignores the second option: ball goes to the first offered bin."""

    name = "one-choice"

    def decide(self, pair, tie_bit):
        return pair[0]

    def run_bulk(self, loads, pa, pb, ties):
        counts = np.bincount(pa, minlength=self.n)
        for i, v in enumerate(counts.tolist()):
            if v:
                loads[i] += v

    def choice_dist(self, pair):
        return ((pair[0], 2),)

    def memory_bits(self, n, balls):
        return 0


class GreedyTwoChoicePolicy(Policy):
    """Full-knowledge baseline: pick the less loaded of the two bins.

    Memory is the entire load vector, declared as n * width(balls) bits.
    Ties are broken by the per-step tie bit.
    """

    name = "greedy"

    def reset(self, n, balls):
        super().reset(n, balls)
        self._mem = [0] * n

    def decide(self, pair, tie_bit):
        a, b = pair
        la, lb = self._mem[a], self._mem[b]
        if la < lb:
            return a
        if lb < la:
            return b
        return pair[tie_bit]

    def update(self, pair, chosen):
        self._mem[chosen] += 1

    def run_bulk(self, loads, pa, pb, ties):
        mem = self._mem
        for a, b, r in zip(pa, pb, ties):
            la, lb = mem[a], mem[b]
            if la < lb:
                c = a
            elif lb < la:
                c = b
            elif r:
                c = b
            else:
                c = a
            mem[c] += 1
            loads[c] += 1

    def state_id(self):
        return hash(tuple(self._mem))

    def snapshot(self):
        return tuple(self._mem)

    def restore(self, state):
        if len(state) != self.n:
            raise ValueError("state length does not match n")
        self._mem = list(state)

    def choice_dist(self, pair):
        a, b = pair
        if a == b:
            return ((a, 2),)
        la, lb = self._mem[a], self._mem[b]
        if la < lb:
            return ((a, 2),)
        if lb < la:
            return ((b, 2),)
        return ((a, 1), (b, 1))

    def memory_bits(self, n, balls):
        return n * int_width(balls)

    def state_space_size(self, n, balls):
        return None  # unbounded-declared: full-knowledge reference


@dataclass(frozen=True)
class ClusterConfig:
    """Geometry of the clustered counters: bins per cluster and saturation cap."""

    cluster_size: int
    counter_cap: int

    def __post_init__(self):
        if self.cluster_size < 1:
            raise ValueError("cluster_size must be >= 1")
        if self.counter_cap < 1:
            raise ValueError("counter_cap must be >= 1")

    @property
    def counter_width(self) -> int:
        return int_width(self.counter_cap)

    def num_clusters(self, n: int) -> int:
        return -(-n // self.cluster_size)

    def total_bits(self, n: int) -> int:
        return self.num_clusters(n) * self.counter_width


def default_cluster_config(n: int) -> ClusterConfig:
    """Cluster size ceil(log2 log2 n), cap 4x that (2x headroom over the
    ~2 log2 log2 n balls a cluster collects in practice)."""
    c = max(1, math.ceil(math.log2(max(math.log2(max(n, 2)), 1.0))))
    return ClusterConfig(cluster_size=c, counter_cap=4 * c)


class ClusteredPolicy(Policy):
    """Sublinear-memory policy: one saturating counter per bin cluster.

    Picks the offered bin whose cluster holds fewer balls; ties (including
    both bins in the same cluster) go to the tie bit. The chosen bin's
    cluster counter increments, clamping at the cap so comparisons stay
    meaningful under bounded width.
    """

    name = "clustered"

    def __init__(self, config: ClusterConfig | None = None):
        self._explicit = config

    def reset(self, n, balls):
        super().reset(n, balls)
        self.config = self._explicit or default_cluster_config(n)
        self._counters = [0] * self.config.num_clusters(n)

    def decide(self, pair, tie_bit):
        a, b = pair
        c = self.config.cluster_size
        va, vb = self._counters[a // c], self._counters[b // c]
        if va < vb:
            return a
        if vb < va:
            return b
        return pair[tie_bit]

    def update(self, pair, chosen):
        cc = chosen // self.config.cluster_size
        if self._counters[cc] < self.config.counter_cap:
            self._counters[cc] += 1

    def run_bulk(self, loads, pa, pb, ties):
        cnt = self._counters
        c = self.config.cluster_size
        cap = self.config.counter_cap
        for a, b, r in zip(pa, pb, ties):
            ca, cb = a // c, b // c
            va, vb = cnt[ca], cnt[cb]
            if va < vb:
                ch, cc = a, ca
            elif vb < va:
                ch, cc = b, cb
            elif r:
                ch, cc = b, cb
            else:
                ch, cc = a, ca
            loads[ch] += 1
            if cnt[cc] < cap:
                cnt[cc] += 1

    def state_id(self):
        k = len(self._counters)
        if k * self.config.counter_width <= 63:
            base = self.config.counter_cap + 1
            sid = 0
            for v in reversed(self._counters):
                sid = sid * base + v
            return sid
        return hash(tuple(self._counters))

    def snapshot(self):
        return tuple(self._counters)

    def restore(self, state):
        if len(state) != self.config.num_clusters(self.n):
            raise ValueError("state length does not match cluster count")
        if any(v < 0 or v > self.config.counter_cap for v in state):
            raise ValueError("counter value out of range")
        self._counters = list(state)

    def choice_dist(self, pair):
        a, b = pair
        if a == b:
            return ((a, 2),)
        c = self.config.cluster_size
        va, vb = self._counters[a // c], self._counters[b // c]
        if va < vb:
            return ((a, 2),)
        if vb < va:
            return ((b, 2),)
        return ((a, 1), (b, 1))

    def memory_bits(self, n, balls):
        cfg = getattr(self, "config", None) or self._explicit or default_cluster_config(n)
        return cfg.total_bits(n)

    def state_space_size(self, n, balls):
        cfg = getattr(self, "config", None) or self._explicit or default_cluster_config(n)
        return (cfg.counter_cap + 1) ** cfg.num_clusters(n)


@dataclass(frozen=True)
class AdviceList:
    """Exact list of bins at or above the threshold, with their counts."""

    threshold: int
    entries: tuple[tuple[int, int], ...]  # (bin, count), sorted by bin

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "entries": [list(e) for e in self.entries]}


def build_advice(loads, threshold: int) -> AdviceList:
    """Oracle for the advice channel: every bin with load >= threshold."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    entries = tuple((i, v) for i, v in enumerate(loads) if v >= threshold)
    return AdviceList(threshold=threshold, entries=entries)


class AdvicePolicy(Policy):
    """No persistent memory; a fresh advice list arrives before every ball.

    The list names every bin currently holding >= threshold balls, with
    exact counts. Decision rule: avoid listed bins when possible; if both
    offered bins are listed, take the one with fewer balls per the advice
    (tie bit on equality); if neither is listed, take the first offered bin.

    The oracle is realized as an exact incremental mirror of the true
    loads, which is equivalent to rebuilding the list from the simulator
    state before each ball. The advice channel cost is reported as the
    maximum over steps of |list| * (bin-index bits + count bits).
    """

    name = "advice"

    def __init__(self, threshold: int):
        if threshold < 1:
            raise ValueError("threshold must be >= 1")
        self.threshold = threshold

    def reset(self, n, balls):
        super().reset(n, balls)
        self._mem = [0] * n
        self._nlisted = 0
        self._prestep_max = 0
        self._entry_bits = int_width(n - 1) + int_width(balls)

    def advice_list(self) -> AdviceList:
        return build_advice(self._mem, self.threshold)

    def decide(self, pair, tie_bit):
        a, b = pair
        T = self.threshold
        la, lb = self._mem[a], self._mem[b]
        if la >= T:
            if lb >= T:
                if la < lb:
                    return a
                if lb < la:
                    return b
                return pair[tie_bit]
            return b
        if lb >= T:
            return a
        return a

    def update(self, pair, chosen):
        if self._nlisted > self._prestep_max:
            self._prestep_max = self._nlisted
        self._mem[chosen] += 1
        if self._mem[chosen] == self.threshold:
            self._nlisted += 1

    def run_bulk(self, loads, pa, pb, ties):
        mem = self._mem
        T = self.threshold
        nlisted = self._nlisted
        c = pa[0] if pa else 0
        for a, b, r in zip(pa, pb, ties):
            la, lb = mem[a], mem[b]
            if la >= T:
                if lb >= T:
                    if la < lb:
                        c = a
                    elif lb < la:
                        c = b
                    elif r:
                        c = b
                    else:
                        c = a
                else:
                    c = b
            else:
                c = a
            mem[c] += 1
            if mem[c] == T:
                nlisted += 1
            loads[c] += 1
        self._nlisted = nlisted
        # max over steps of the pre-step list size; the list only grows, so
        # that is the size before the final ball
        if pa:
            last_crossed = 1 if mem[c] == T else 0
            prestep = nlisted - last_crossed
            if prestep > self._prestep_max:
                self._prestep_max = prestep

    def state_id(self):
        return hash(self._listed_tuple())

    def _listed_tuple(self):
        T = self.threshold
        return tuple((i, v) for i, v in enumerate(self._mem) if v >= T)

    def snapshot(self):
        return tuple(self._mem)

    def restore(self, state):
        if len(state) != self.n:
            raise ValueError("state length does not match n")
        self._mem = list(state)
        self._nlisted = sum(1 for v in state if v >= self.threshold)

    def choice_dist(self, pair):
        a, b = pair
        if a == b:
            return ((a, 2),)
        T = self.threshold
        la, lb = self._mem[a], self._mem[b]
        ina, inb = la >= T, lb >= T
        if ina and inb:
            if la < lb:
                return ((a, 2),)
            if lb < la:
                return ((b, 2),)
            return ((a, 1), (b, 1))
        if ina:
            return ((b, 2),)
        return ((a, 2),)

    def memory_bits(self, n, balls):
        # advice channel cost, max over steps; 0 until a run has happened
        prestep = getattr(self, "_prestep_max", 0)
        return prestep * (int_width(n - 1) + int_width(balls))

    def state_space_size(self, n, balls):
        return None  # state is the advice content, bounded only in expectation


class MaxIndexPolicy(Policy):
    """Toy: always the larger bin index of the pair."""

    name = "max-index"

    def decide(self, pair, tie_bit):
        return pair[0] if pair[0] >= pair[1] else pair[1]

    def choice_dist(self, pair):
        return ((max(pair), 2),)

    def memory_bits(self, n, balls):
        return 0


class MinIndexPolicy(Policy):
    """Toy: always the smaller bin index of the pair."""

    name = "min-index"

    def decide(self, pair, tie_bit):
        return pair[0] if pair[0] <= pair[1] else pair[1]

    def choice_dist(self, pair):
        return ((min(pair), 2),)

    def memory_bits(self, n, balls):
        return 0


class IllegalFixedBinPolicy(Policy):
    """Negative control: dumps every ball into one bin, ignoring the pair.

    Violates the two-choice rules on purpose; the verifier must flag it.
    """

    name = "illegal-fixture"

    def __init__(self, target: int = 0):
        self.target = target

    def decide(self, pair, tie_bit):
        return self.target

    def choice_dist(self, pair):
        return ((self.target, 2),)

    def memory_bits(self, n, balls):
        return 0


def memory_bits(policy: Policy, config) -> int:
    """Declared bit budget of a policy for a given run configuration."""
    return policy.memory_bits(config.n, config.balls)


POLICY_NAMES = (
    "one-choice",
    "greedy",
    "clustered",
    "advice",
    "max-index",
    "min-index",
    "illegal-fixture",
)


def make_policy(name: str, **params) -> Policy:
    """Build a policy by registry name.

    clustered accepts cluster_size/counter_cap (both or neither); advice
    requires threshold.
    """
    if name == "one-choice":
        _reject_params(name, params)
        return OneChoicePolicy()
    if name == "greedy":
        _reject_params(name, params)
        return GreedyTwoChoicePolicy()
    if name == "clustered":
        cs = params.pop("cluster_size", None)
        cap = params.pop("counter_cap", None)
        _reject_params(name, params)
        if cs is None and cap is None:
            return ClusteredPolicy()
        if cs is None or cap is None:
            raise ValueError("clustered needs both cluster_size and counter_cap, or neither")
        return ClusteredPolicy(ClusterConfig(cluster_size=cs, counter_cap=cap))
    if name == "advice":
        t = params.pop("threshold", None)
        _reject_params(name, params)
        if t is None:
            raise ValueError("advice policy needs a threshold")
        return AdvicePolicy(threshold=t)
    if name == "max-index":
        _reject_params(name, params)
        return MaxIndexPolicy()
    if name == "min-index":
        _reject_params(name, params)
        return MinIndexPolicy()
    if name == "illegal-fixture":
        target = params.pop("target", 0)
        _reject_params(name, params)
        return IllegalFixedBinPolicy(target=target)
    raise ValueError(f"unknown policy: {name!r}")


def _reject_params(name, params):
    if params:
        raise ValueError(f"unexpected parameters for {name}: {sorted(params)}")
