"""Event streams over a bounded domain: add/delete points arriving in timed batches.

The raw input is a *differential* stream: each batch lists the points added
(weight +1) or removed (weight -1) at that time step. The cumulative dataset
at time t is the running sum of all batches up to t.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

Point = tuple[float, ...]


class StreamError(ValueError):
    """Raised when a stream violates its structural invariants."""


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box the data lives in. Defaults to the unit square."""

    dim: int = 2
    bounds: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not self.bounds:
            object.__setattr__(self, "bounds", tuple((0.0, 1.0) for _ in range(self.dim)))
        if len(self.bounds) != self.dim:
            raise ValueError("bounds length must equal dim")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")

    def contains(self, point: Point) -> bool:
        if len(point) != self.dim:
            return False
        return all(lo <= x <= hi for x, (lo, hi) in zip(point, self.bounds))


@dataclass(frozen=True)
class Event:
    """A single unit addition (+1) or deletion (-1) of a point."""

    point: Point
    weight: int = 1

    def __post_init__(self):
        if self.weight not in (1, -1):
            raise ValueError(f"weight must be +1 or -1, got {self.weight}")


@dataclass(frozen=True)
class Batch:
    """All events arriving at one time step. May be empty."""

    time: int
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        if self.time < 1:
            raise ValueError(f"time must be >= 1, got {self.time}")
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))


@dataclass(frozen=True)
class DiffStream:
    """A time-ordered differential stream.

    Batch times are strictly increasing; times missing between them are
    implicitly empty. Construction validates domain membership and
    prefix-positivity (a point can only be deleted while present).
    """

    domain: Domain
    batches: tuple[Batch, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not isinstance(self.batches, tuple):
            object.__setattr__(self, "batches", tuple(self.batches))
        last_t = 0
        for batch in self.batches:
            if batch.time <= last_t:
                raise StreamError(
                    f"batch times must be strictly increasing ({batch.time} after {last_t})"
                )
            last_t = batch.time
        multiplicity: Counter[Point] = Counter()
        for batch in self.batches:
            for ev in batch.events:
                if not self.domain.contains(ev.point):
                    raise StreamError(f"point {ev.point} outside domain at t={batch.time}")
                multiplicity[ev.point] += ev.weight
                if multiplicity[ev.point] < 0:
                    raise StreamError(
                        f"deletion of absent point {ev.point} at t={batch.time}"
                    )

    @property
    def horizon(self) -> int:
        """Largest batch time (0 for an empty stream)."""
        return self.batches[-1].time if self.batches else 0


def total_change(stream: DiffStream) -> int:
    """Total absolute event mass of the stream.

    This is the quantity with respect to which two streams are neighbors:
    streams at distance one differ by a single add-or-delete event.
    """
    return sum(len(batch.events) for batch in stream.batches)


def cumulative_snapshot(stream: DiffStream, t: int) -> Counter[Point]:
    """Multiset of points present at time t (all batches up to t applied)."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    multiplicity: Counter[Point] = Counter()
    for batch in stream.batches:
        if batch.time > t:
            break
        for ev in batch.events:
            multiplicity[ev.point] += ev.weight
    return +multiplicity  # drop zero entries


def apply_initialization(stream: DiffStream, t0: int) -> DiffStream:
    """Fold the prefix up to t0 into a single first batch.

    The returned stream has the merged prefix at time 1 and batch t0+k-1
    re-indexed to time k. Holding back early data this way gives the
    engine a well-populated first step.
    """
    if t0 < 1:
        raise ValueError(f"t0 must be >= 1, got {t0}")
    head: list[Event] = []
    merged_any = False
    tail: list[Batch] = []
    for batch in stream.batches:
        if batch.time <= t0:
            head.extend(batch.events)
            merged_any = True
        else:
            tail.append(Batch(time=batch.time - t0 + 1, events=batch.events))
    prefix = (Batch(1, tuple(head)),) if merged_any else ()
    return DiffStream(domain=stream.domain, batches=(*prefix, *tail))
