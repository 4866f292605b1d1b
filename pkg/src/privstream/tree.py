"""Implicit hierarchical partition of the domain and functions on its nodes.

Nodes are identified by their path from the root: a tuple of child indices,
each in [0, fanout). Level k splits dimension (k mod dim) into `fanout`
equal parts, so the tree never needs to be materialized; regions and point
locations are computed from paths on demand.

Cell edges are closed below and open above, except that the domain's upper
boundary stays closed so every in-domain point lands in exactly one cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .stream import Domain, Event, Point

NodeId = tuple[int, ...]
ROOT: NodeId = ()

# Sparse node -> value map; absent keys mean 0.
TreeFunction = dict[NodeId, float]


@dataclass(frozen=True)
class Box:
    """Axis-aligned cell; `closed_high[j]` marks sides flush with the domain top."""

    lows: tuple[float, ...]
    highs: tuple[float, ...]
    closed_high: tuple[bool, ...]

    def contains(self, point: Point) -> bool:
        for x, lo, hi, closed in zip(point, self.lows, self.highs, self.closed_high):
            if x < lo:
                return False
            if x > hi or (x == hi and not closed):
                return False
        return True


def _cut(lo: float, hi: float, i: int, fanout: int) -> float:
    # Shared by region and locate code (and mirrored in the kernels) so that
    # boundary points are assigned identically everywhere.
    return lo + (hi - lo) * i / fanout


@dataclass(frozen=True)
class PartitionTree:
    """Geometry of the implicit partition tree: domain, fanout, depth cap."""

    domain: Domain
    fanout: int = 2
    max_depth: int = 20

    def __post_init__(self):
        if self.fanout < 2:
            raise ValueError(f"fanout must be >= 2, got {self.fanout}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")

    def children(self, v: NodeId) -> list[NodeId]:
        return [v + (i,) for i in range(self.fanout)]

    def split_dim(self, depth: int) -> int:
        return depth % self.domain.dim

    def node_region(self, v: NodeId) -> Box:
        """Cell of node `v`, obtained by folding the split rule along its path."""
        if len(v) > self.max_depth:
            raise ValueError(f"node depth {len(v)} exceeds max_depth {self.max_depth}")
        lows = [lo for lo, _ in self.domain.bounds]
        highs = [hi for _, hi in self.domain.bounds]
        for depth, digit in enumerate(v):
            if not 0 <= digit < self.fanout:
                raise ValueError(f"digit {digit} out of range for fanout {self.fanout}")
            j = self.split_dim(depth)
            lo, hi = lows[j], highs[j]
            lows[j] = _cut(lo, hi, digit, self.fanout)
            if digit < self.fanout - 1:
                highs[j] = _cut(lo, hi, digit + 1, self.fanout)
        closed = tuple(h == top for h, (_, top) in zip(highs, self.domain.bounds))
        return Box(tuple(lows), tuple(highs), closed)

    def locate_leaf(self, point: Point, depth: int) -> NodeId:
        """Unique depth-`depth` node whose cell contains `point`."""
        if depth > self.max_depth:
            raise ValueError(f"depth {depth} exceeds max_depth {self.max_depth}")
        if not self.domain.contains(point):
            raise ValueError(f"point {point} outside domain")
        lows = [lo for lo, _ in self.domain.bounds]
        highs = [hi for _, hi in self.domain.bounds]
        path = []
        for level in range(depth):
            j = self.split_dim(level)
            lo, hi, x = lows[j], highs[j], point[j]
            digit = self.fanout - 1
            for i in range(1, self.fanout):
                if x < _cut(lo, hi, i, self.fanout):
                    digit = i - 1
                    break
            path.append(digit)
            lows[j] = _cut(lo, hi, digit, self.fanout)
            if digit < self.fanout - 1:
                highs[j] = _cut(lo, hi, digit + 1, self.fanout)
        return tuple(path)


def contract(
    tree: PartitionTree, events: Iterable[Event], nodes: Iterable[NodeId]
) -> TreeFunction:
    """Signed event count per node: sum of weights of events inside each cell."""
    events = list(events)
    nodes = list(nodes)
    if not events:
        return {v: 0.0 for v in nodes}
    coords = np.array([ev.point for ev in events], dtype=np.float64)
    weights = np.array([ev.weight for ev in events], dtype=np.float64)
    out: TreeFunction = {}
    for v in nodes:
        box = tree.node_region(v)
        mask = np.ones(len(events), dtype=bool)
        for j in range(tree.domain.dim):
            x = coords[:, j]
            upper = x <= box.highs[j] if box.closed_high[j] else x < box.highs[j]
            mask &= (x >= box.lows[j]) & upper
        out[v] = float(weights[mask].sum())
    return out


def is_ancestor_or_self(v: NodeId, u: NodeId) -> bool:
    """True iff `u` lies in the subtree rooted at `v` (including v itself)."""
    return len(u) >= len(v) and u[: len(v)] == v


def directed_distance(v: NodeId, u: NodeId) -> int:
    """Depth difference if `u` is below-or-at `v`; minus the graph distance otherwise."""
    if is_ancestor_or_self(v, u):
        return len(u) - len(v)
    common = 0
    for a, b in zip(v, u):
        if a != b:
            break
        common += 1
    return -(len(v) + len(u) - 2 * common)


def is_consistent(
    values: Mapping[NodeId, float], subtree: Iterable[NodeId], *, tol: float = 1e-9
) -> bool:
    """Check parent = sum-of-children at every fully expanded node of `subtree`."""
    nodes = set(subtree)
    kids: dict[NodeId, list[NodeId]] = {}
    for v in nodes:
        if v != ROOT and v[:-1] in nodes:
            kids.setdefault(v[:-1], []).append(v)
    for v, children in kids.items():
        total = sum(values.get(u, 0.0) for u in children)
        if abs(values.get(v, 0.0) - total) > tol:
            return False
    return True


def _extension_weight(v: NodeId, u: NodeId, fanout: int) -> float:
    # Weight of support node v at query node u: deposits pass to ancestors
    # unchanged and spread uniformly over descendants; unrelated nodes get 0.
    if is_ancestor_or_self(u, v) and len(u) < len(v):
        return 1.0
    if is_ancestor_or_self(v, u):
        return float(fanout) ** -(len(u) - len(v))
    return 0.0


def weighted_extension(
    values: Mapping[NodeId, float], tree: PartitionTree, query_nodes: Iterable[NodeId]
) -> TreeFunction:
    """Direct evaluation of the consistent extension, any support shape."""
    return {
        u: sum(x * _extension_weight(v, u, tree.fanout) for v, x in values.items())
        for u in query_nodes
    }


def consistent_extension(
    values: Mapping[NodeId, float], tree: PartitionTree, query_nodes: Iterable[NodeId]
) -> TreeFunction:
    """Extend values on an antichain to a consistent function, at `query_nodes`.

    The result agrees with `values` on its support, equals the sum of
    supported descendants on every ancestor, and spreads each supported
    value uniformly over its descendants.
    """
    keys = set(values)
    for v in keys:
        for k in range(len(v)):
            if v[:k] in keys:
                raise ValueError(f"support is not an antichain: {v[:k]} above {v}")
    return weighted_extension(values, tree, query_nodes)
