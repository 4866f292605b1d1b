"""Differentially private running-sum estimators for value streams.

Three variants with different error/time tradeoffs:

* simple: one Laplace(1/eps) per step; error std grows like sqrt(t).
* block: within-block noise per step plus one noise per completed block of
  size B, resetting the within-block accumulator; error grows like the
  number of completed blocks plus the offset into the current block.
* binarytree: dyadic partial sums, each noised once at scale log2(T)/eps;
  error at time t involves only popcount(t) terms, but the horizon T must
  be known up front.

Each counter consumes exactly one noise draw per feed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

from .noise import NoiseSource


@dataclass(frozen=True)
class CounterKind:
    """Which counter to instantiate; `param` is B for block, T for binarytree."""

    name: str
    param: int | None = None

    _NAMES = ("simple", "block", "binarytree")

    def __post_init__(self):
        if self.name not in self._NAMES:
            raise ValueError(f"unknown counter kind {self.name!r}")
        if self.name == "simple" and self.param is not None:
            raise ValueError("simple counter takes no parameter")
        if self.name != "simple" and (self.param is None or self.param < 1):
            raise ValueError(f"{self.name} counter needs a positive parameter")

    @classmethod
    def parse(cls, token: str) -> "CounterKind":
        """Parse CLI tokens: 'simple', 'block:B', 'binarytree:T'."""
        name, _, arg = token.partition(":")
        if name == "simple":
            if arg:
                raise ValueError("simple counter takes no parameter")
            return cls("simple")
        if not arg:
            raise ValueError(f"counter {name!r} needs a parameter, e.g. '{name}:8'")
        return cls(name, int(arg))

    def __str__(self) -> str:
        return self.name if self.param is None else f"{self.name}:{self.param}"


class Counter:
    """Base: tracks internal time; subclasses implement one feed step."""

    def __init__(self, epsilon: float):
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.epsilon = epsilon
        self.t = 0

    def feed(self, x: float, noise: NoiseSource, key: Hashable = None) -> float:
        """Advance one step with increment `x`; return the DP running-sum estimate."""
        self.t += 1
        return self._feed(x, noise, key)

    def _feed(self, x: float, noise: NoiseSource, key: Hashable) -> float:
        raise NotImplementedError


class SimpleCounter(Counter):
    def __init__(self, epsilon: float):
        super().__init__(epsilon)
        self.g = 0.0

    def _feed(self, x, noise, key):
        self.g += x + noise.laplace(1.0 / self.epsilon, key=key)
        return self.g


class BlockCounter(Counter):
    def __init__(self, epsilon: float, block_size: int):
        super().__init__(epsilon)
        if block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {block_size}")
        self.block_size = block_size
        self.within = 0.0        # alpha: noisy sum over the current partial block
        self.running = 0.0       # beta: noisy sum over everything seen
        self.last_block = 0.0    # running at the last completed block boundary

    def _feed(self, x, noise, key):
        scale = 2.0 / self.epsilon
        self.running += x
        if self.t % self.block_size == 0:
            self.within = 0.0
            self.running += noise.laplace(scale, key=key)
            self.last_block = self.running
        else:
            self.within += x + noise.laplace(scale, key=key)
        return self.last_block + self.within


class BinaryTreeCounter(Counter):
    def __init__(self, epsilon: float, horizon: int):
        super().__init__(epsilon)
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.horizon = horizon
        levels = horizon.bit_length()
        self.partial = [0.0] * levels
        self.noisy = [0.0] * levels

    def _feed(self, x, noise, key):
        if self.t > self.horizon:
            raise RuntimeError(f"binarytree counter exhausted its horizon {self.horizon}")
        scale = math.log2(self.horizon) / self.epsilon if self.horizon > 1 else 1.0 / self.epsilon
        j = (self.t & -self.t).bit_length() - 1  # lowest set bit of t
        self.partial[j] = sum(self.partial[:j]) + x
        self.noisy[j] = self.partial[j] + noise.laplace(scale, key=key)
        for i in range(j):
            self.partial[i] = 0.0
            self.noisy[i] = 0.0
        return sum(self.noisy[i] for i in range(len(self.noisy)) if self.t >> i & 1)


def make_counter(kind: CounterKind, epsilon: float) -> Counter:
    if kind.name == "simple":
        return SimpleCounter(epsilon)
    if kind.name == "block":
        return BlockCounter(epsilon, kind.param)
    return BinaryTreeCounter(epsilon, kind.param)


def counter_error_std(kind: CounterKind, epsilon: float, t: int) -> float:
    """Analytic std of the counter's error at time t (test oracle).

    Derived from the per-step noise pattern: each Laplace(b) term contributes
    variance 2 b^2, and the formulas below just count the live terms.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if kind.name == "simple":
        return math.sqrt(2.0 * t) / epsilon
    if kind.name == "block":
        completed, offset = divmod(t, kind.param)
        return math.sqrt(8.0 * (completed + offset)) / epsilon
    if t > kind.param:
        raise ValueError(f"t={t} beyond binarytree horizon {kind.param}")
    scale = math.log2(kind.param) / epsilon if kind.param > 1 else 1.0 / epsilon
    return math.sqrt(2.0 * t.bit_count()) * scale


class MultiCounter:
    """Bundle of independent counters fed componentwise."""

    def __init__(self, counters: Sequence[Counter]):
        self.counters = list(counters)

    def feed(self, xs: Sequence[float], noise: NoiseSource) -> list[float]:
        if len(xs) != len(self.counters):
            raise ValueError(f"expected {len(self.counters)} values, got {len(xs)}")
        return [c.feed(x, noise) for c, x in zip(self.counters, xs)]


Selector = Callable[[float, list[tuple[int, int, float]]], int]


class SelectiveCounter:
    """Feed each step's value to exactly one of k counters, chosen by a selector.

    The selector sees the current input and the full output history
    (time, chosen index, value); non-selected counters do not advance, so
    counter i only ever sees the restriction of the stream to its own steps.
    """

    def __init__(self, counters: Sequence[Counter], selector: Selector):
        self.counters = list(counters)
        self.selector = selector
        self.history: list[tuple[int, int, float]] = []
        self.times_by_counter: dict[int, list[int]] = {i: [] for i in range(len(counters))}
        self.t = 0

    def step(self, x: float, noise: NoiseSource) -> tuple[int, float]:
        self.t += 1
        idx = self.selector(x, self.history)
        if not 0 <= idx < len(self.counters):
            raise IndexError(f"selector returned {idx}, have {len(self.counters)} counters")
        value = self.counters[idx].feed(x, noise)
        self.times_by_counter[idx].append(self.t)
        self.history.append((self.t, idx, value))
        return idx, value
