"""Injectable Laplace noise sources.

All randomized mechanisms draw through a NoiseSource, which makes three
things possible without touching mechanism code: deterministic seeded runs,
noise-free traces for exact tests, and draw-for-draw sharing between two
implementations that must produce identical output. Every source keeps a
per-scale draw count so tests can audit how a privacy budget was spent.

Draws may carry a hashable `key` naming the (step, node, purpose) they
belong to; replay matches draws by key, so two implementations that visit
the same nodes in different orders still receive identical noise.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Hashable

import numpy as np


class NoiseSource:
    """Base class: draw counting plus the sampling hook."""

    def __init__(self):
        self.draws_by_scale: Counter[float] = Counter()

    def laplace(self, scale: float, key: Hashable = None) -> float:
        if scale <= 0:
            raise ValueError(f"scale must be positive, got {scale}")
        self.draws_by_scale[scale] += 1
        return self._draw(scale, key)

    def _draw(self, scale: float, key: Hashable) -> float:
        raise NotImplementedError

    @property
    def total_draws(self) -> int:
        return sum(self.draws_by_scale.values())


class SeededNoise(NoiseSource):
    """Laplace draws via inverse CDF applied to a 64-bit uniform."""

    def __init__(self, seed):
        super().__init__()
        self.rng = np.random.default_rng(seed)

    def _draw(self, scale: float, key: Hashable) -> float:
        u = self.rng.random()
        # u == 0 would map to -inf; nudge to the smallest positive double.
        u = max(u, 5e-324)
        if u < 0.5:
            return scale * math.log(2.0 * u)
        return -scale * math.log(2.0 * (1.0 - u))


class ZeroNoise(NoiseSource):
    """Always returns 0; turns every mechanism into its exact counterpart."""

    def _draw(self, scale: float, key: Hashable) -> float:
        return 0.0


class RecordingNoise(NoiseSource):
    """Wraps another source and logs every keyed draw for later replay."""

    def __init__(self, base: NoiseSource):
        super().__init__()
        self.base = base
        self.recorded: dict[Hashable, tuple[float, float]] = {}

    def _draw(self, scale: float, key: Hashable) -> float:
        value = self.base.laplace(scale, key)
        if key is not None:
            if key in self.recorded:
                raise ValueError(f"duplicate noise key {key!r}")
            self.recorded[key] = (scale, value)
        return value


class ReplayNoise(NoiseSource):
    """Replays draws recorded by a RecordingNoise, matched by key.

    Raises if a replayed draw requests a different scale than was recorded:
    two supposedly equivalent implementations must spend noise identically.
    """

    def __init__(self, recorded: dict[Hashable, tuple[float, float]]):
        super().__init__()
        self.recorded = recorded
        self.replayed: set[Hashable] = set()

    def _draw(self, scale: float, key: Hashable) -> float:
        if key is None:
            raise ValueError("replay requires keyed draws")
        if key not in self.recorded:
            raise KeyError(f"no recorded draw for key {key!r}")
        rec_scale, value = self.recorded[key]
        if not math.isclose(scale, rec_scale, rel_tol=1e-12):
            raise ValueError(
                f"scale mismatch at {key!r}: recorded {rec_scale}, requested {scale}"
            )
        self.replayed.add(key)
        return value
