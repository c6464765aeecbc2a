"""Dynamic lightpath demand: Poisson arrivals, uniform endpoints and
bandwidths, exponential holding times, and the departure event queue."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Request:
    """One lightpath demand."""

    id: int
    src: int
    dst: int
    bandwidth_gbps: float
    duration: float
    arrival_time: float


@dataclass(frozen=True)
class TrafficConfig:
    arrival_rate: float
    mean_duration: float
    bandwidth_min: float = 25.0
    bandwidth_max: float = 100.0

    def __post_init__(self) -> None:
        if self.arrival_rate <= 0:
            raise ValueError(f"arrival_rate must be > 0, got {self.arrival_rate}")
        if self.mean_duration <= 0:
            raise ValueError(
                f"mean_duration must be > 0, got {self.mean_duration}")
        if not 0 < self.bandwidth_min <= self.bandwidth_max:
            raise ValueError(
                f"bandwidth range [{self.bandwidth_min}, {self.bandwidth_max}] "
                "is invalid")

    @property
    def offered_load_erlang(self) -> float:
        return self.arrival_rate * self.mean_duration


def next_request(rng: np.random.Generator, cfg: TrafficConfig, node_count: int,
                 now: float, request_id: int) -> Request:
    """Sample the next arrival after ``now``.

    Interarrival is exponential with mean 1/arrival_rate, (src, dst) is
    uniform over ordered pairs with src != dst, bandwidth uniform over the
    configured range, holding time exponential with the configured mean.
    """
    arrival = now + rng.exponential(1.0 / cfg.arrival_rate)
    src = int(rng.integers(node_count))
    dst = int(rng.integers(node_count - 1))
    if dst >= src:
        dst += 1
    bandwidth = float(rng.uniform(cfg.bandwidth_min, cfg.bandwidth_max))
    duration = float(rng.exponential(cfg.mean_duration))
    return Request(request_id, src, dst, bandwidth, duration, arrival)


class RequestStream:
    """Stateful request source: monotone ids and a running clock."""

    def __init__(self, cfg: TrafficConfig, node_count: int,
                 rng: np.random.Generator):
        if node_count < 2:
            raise ValueError("need at least 2 nodes to generate demands")
        self.cfg = cfg
        self.node_count = node_count
        self.rng = rng
        self.now = 0.0
        self._next_id = 0

    def next(self) -> Request:
        req = next_request(self.rng, self.cfg, self.node_count, self.now,
                           self._next_id)
        self._next_id += 1
        self.now = req.arrival_time
        return req


class DepartureQueue:
    """Pending lightpath expirations, popped in (expiry, id) order."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int]] = []

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, expiry: float, lightpath_id: int) -> None:
        heapq.heappush(self._heap, (expiry, lightpath_id))

    def pop_expired(self, now: float) -> list[int]:
        """Remove and return ids of all entries with expiry <= now."""
        heap = self._heap
        expired: list[int] = []
        while heap and heap[0][0] <= now:
            expired.append(heapq.heappop(heap)[1])
        return expired
