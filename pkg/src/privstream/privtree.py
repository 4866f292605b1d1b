"""Data-adaptive selection of a private subtree of the partition tree.

A node is expanded when its noised, depth-biased count clears a threshold:
bias grows linearly with depth (delta per level) so expansion always stops,
and the clamp at theta - delta keeps decisions for sparse nodes independent
of exactly how empty they are. Noise scale lambda and decay delta are tied
together so the whole recursion costs a fixed privacy budget regardless of
how deep the selected subtree ends up.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable

from .noise import NoiseSource
from .tree import NodeId, PartitionTree, ROOT


@dataclass(frozen=True)
class PrivTreeParams:
    """Budget and threshold, with the derived noise scale and depth decay."""

    epsilon: float
    theta: float = 0.0
    beta: int = 2
    lam: float = field(init=False)
    delta: float = field(init=False)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.beta < 2:
            raise ValueError(f"beta must be >= 2, got {self.beta}")
        lam = (2 * self.beta - 1) / (self.beta - 1) * (2.0 / self.epsilon)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "delta", lam * math.log(self.beta))


@dataclass(frozen=True)
class Subtree:
    """Parent-closed node set in visit order, plus its leaf frontier."""

    nodes: tuple[NodeId, ...]
    leaves: tuple[NodeId, ...]

    def node_set(self) -> set[NodeId]:
        return set(self.nodes)


def priv_tree(
    count: Callable[[NodeId], float],
    params: PrivTreeParams,
    max_depth: int,
    noise: NoiseSource,
    key_prefix: tuple[Hashable, ...] | None = None,
) -> Subtree:
    """Grow a subtree breadth-first, expanding nodes whose noised count exceeds theta.

    `count` is queried once per visited node. Every visited node draws one
    Laplace(lambda), including nodes at the depth cap (the cap suppresses
    expansion but not the draw, keeping the noise pattern data-independent).
    Expanding a node always adds all `beta` children.
    """
    nodes: list[NodeId] = []
    leaves: list[NodeId] = []
    queue: deque[NodeId] = deque([ROOT])
    while queue:
        v = queue.popleft()
        nodes.append(v)
        b = count(v) - len(v) * params.delta
        b = max(b, params.theta - params.delta)
        key = key_prefix + (v,) if key_prefix is not None else None
        b_noisy = b + noise.laplace(params.lam, key=key)
        if b_noisy > params.theta and len(v) < max_depth:
            queue.extend(v + (i,) for i in range(params.beta))
        else:
            leaves.append(v)
    return Subtree(nodes=tuple(nodes), leaves=tuple(leaves))


def _log_sf(z: float, lam: float) -> float:
    # log P(Laplace(lam) > z)
    if z >= 0:
        return math.log(0.5) - z / lam
    return math.log1p(-0.5 * math.exp(z / lam))


def threshold_log_ratio(x: float, lam: float, theta: float) -> float:
    """log of P(x + Laplace(lam) > theta) over the same with x shifted down by 1.

    This is the exact per-node privacy loss of one expansion decision when a
    count changes by one; the privacy argument bounds it by
    `threshold_log_ratio_bound`.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    return _log_sf(theta - x, lam) - _log_sf(theta - x + 1, lam)


def threshold_log_ratio_bound(x: float, lam: float, theta: float) -> float:
    """Piecewise upper bound for `threshold_log_ratio`: flat 1/lam below
    theta + 1, exponentially decaying above."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if x < theta + 1:
        return 1.0 / lam
    return math.exp((theta + 1 - x) / lam) / lam
