"""Per-link frequency-slot occupancy with contiguous-block search.

A lightpath occupies the same contiguous slot range on every link of its
route (no spectrum conversion), so feasibility on a path reduces to block
search over the slot-wise AND of the links' free masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .topology import CandidatePath, Topology


@dataclass(frozen=True)
class FreeBlock:
    """A maximal run of slots free on every link of the queried path."""

    start: int
    size: int


@dataclass(frozen=True)
class Lightpath:
    id: int
    link_ids: tuple[int, ...]
    start: int
    n_slots: int
    expiry: float


def _mask_blocks(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Starts and sizes of maximal True runs in a boolean mask."""
    edged = np.empty(mask.size + 2, dtype=bool)
    edged[0] = edged[-1] = False
    edged[1:-1] = mask
    edges = np.flatnonzero(edged[1:] != edged[:-1])
    starts = edges[0::2]
    sizes = edges[1::2] - starts
    return starts, sizes


def first_fit(blocks: list[FreeBlock], n: int) -> int | None:
    """Start of the lowest block that holds ``n`` slots, if any.

    ``blocks`` must be sorted by start slot, as returned by
    :meth:`NetworkSpectrum.available_blocks`.
    """
    for block in blocks:
        if block.size >= n:
            return block.start
    return None


class NetworkSpectrum:
    """Slot occupancy for every link plus the active lightpath records."""

    def __init__(self, topology: Topology):
        self.topology = topology
        self.slot_count = topology.slot_count
        self._occupancy = np.zeros((topology.link_count, topology.slot_count),
                                   dtype=bool)
        self._active: dict[int, Lightpath] = {}

    @property
    def active_lightpaths(self) -> dict[int, Lightpath]:
        return dict(self._active)

    def path_free_mask(self, path: CandidatePath) -> np.ndarray:
        """Slots simultaneously free on every link of ``path``."""
        ids = path.link_ids
        if len(ids) == 1:
            return ~self._occupancy[ids[0]]
        return ~(self._occupancy[list(ids)].any(axis=0))

    def block_spans(self, path: CandidatePath) -> tuple[np.ndarray, np.ndarray]:
        """(starts, sizes) arrays of the maximal free blocks along ``path``."""
        return _mask_blocks(self.path_free_mask(path))

    def usable_block_spans(self, path: CandidatePath,
                           n: int) -> tuple[np.ndarray, np.ndarray]:
        """Maximal free blocks along ``path`` that can hold ``n`` slots.

        These are the blocks a demand of ``n`` slots could actually use;
        the first one is the first-fit placement.
        """
        starts, sizes = _mask_blocks(self.path_free_mask(path))
        keep = sizes >= n
        return starts[keep], sizes[keep]

    def available_blocks(self, path: CandidatePath) -> list[FreeBlock]:
        """All maximal free blocks along ``path``, ascending by start slot."""
        starts, sizes = self.block_spans(path)
        return [FreeBlock(int(s), int(z)) for s, z in zip(starts, sizes)]

    def path_stats(self, path: CandidatePath) -> tuple[float, int]:
        """(average free-block size, total free slots); (0.0, 0) when full."""
        _, sizes = self.block_spans(path)
        if sizes.size == 0:
            return 0.0, 0
        return float(sizes.mean()), int(sizes.sum())

    def allocate(self, path: CandidatePath, start: int, n: int,
                 lightpath_id: int, expiry: float) -> None:
        """Occupy ``[start, start + n)`` on every link of ``path``."""
        if n < 1:
            raise ContractViolation(f"slot count must be positive, got {n}")
        if start < 0 or start + n > self.slot_count:
            raise ContractViolation(
                f"slot range [{start}, {start + n}) outside grid of "
                f"{self.slot_count}")
        if lightpath_id in self._active:
            raise ContractViolation(f"lightpath {lightpath_id} already active")
        ids = list(path.link_ids)
        region = self._occupancy[ids, start:start + n]
        if region.any():
            raise ContractViolation(
                f"allocation [{start}, {start + n}) overlaps occupied slots "
                f"on path links {path.link_ids}")
        self._occupancy[ids, start:start + n] = True
        self._active[lightpath_id] = Lightpath(
            lightpath_id, path.link_ids, start, n, expiry)

    def release(self, lightpath_id: int) -> None:
        """Free every slot held by the given lightpath."""
        record = self._active.pop(lightpath_id, None)
        if record is None:
            raise ContractViolation(f"lightpath {lightpath_id} is not active")
        ids = list(record.link_ids)
        self._occupancy[ids, record.start:record.start + record.n_slots] = False

    def occupied_slot_count(self) -> int:
        return int(self._occupancy.sum())

    def dump(self) -> str:
        """Debug snapshot: one 0/1 row per link, slot 0 first."""
        return "\n".join(
            "".join("1" if used else "0" for used in row)
            for row in self._occupancy)
