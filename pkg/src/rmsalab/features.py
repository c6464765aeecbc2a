"""State encoding: one request plus the spectrum condition of its
candidate paths, flattened to a fixed-length array in [-1, 1].

Layout, in order: one-hot source over the node set, one-hot destination,
scaled holding time, then per candidate path the (start, size) of the
first J free blocks large enough to hold this request on that path, the
slot count the path needs, the average free-block size and the total
free slots. A block the demand cannot use tells the policy nothing
about where the request could go, so the J reported blocks are the
usable ones (the first being the first-fit placement) and a sentinel
marks their absence. In episode mode one trailing element carries the
request's position within the episode. Every field is scaled by a fixed
constant (grid size, maximum slot need, twice the mean holding time) so
encoding is stateless and reproducible.
"""

from __future__ import annotations

import numpy as np

from .spectrum import NetworkSpectrum
from .topology import CandidatePath, Topology, required_slots
from .traffic import Request

# A path with fewer than J usable blocks pads with this (start, size)
# pair. The start sentinel is an encoded value, deliberately not scaled
# down by the grid size: absence of a placement must stay an O(1) signal
# against real starts in [0, 1), or the network cannot separate
# "infeasible" from "fits near slot 0".
MISSING_BLOCK = (-1.0, 0.0)

MODES = ("ep", "flx")


def state_length(node_count: int, k_paths: int, j_blocks: int,
                 with_position: bool) -> int:
    """Encoded array length for a given topology size and path/block count."""
    return 2 * node_count + 1 + (2 * j_blocks + 3) * k_paths + int(with_position)


class StateEncoder:
    """Pure encoder from (request, spectrum snapshot) to a feature array."""

    def __init__(self, topology: Topology, *, k_paths: int, j_blocks: int = 1,
                 mode: str = "flx", mean_duration: float = 1.0,
                 slot_capacity_gbps: float = 12.5,
                 bandwidth_max_gbps: float = 100.0):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if k_paths < 1 or j_blocks < 1:
            raise ValueError("k_paths and j_blocks must be positive")
        self.node_count = topology.num_nodes
        self.slot_count = topology.slot_count
        self.k_paths = k_paths
        self.j_blocks = j_blocks
        self.mode = mode
        self.with_position = mode == "ep"
        self.tau_scale = 2.0 * mean_duration
        self.slot_capacity_gbps = slot_capacity_gbps
        self.max_slots = required_slots(bandwidth_max_gbps, 1, slot_capacity_gbps)
        self.length = state_length(self.node_count, k_paths, j_blocks,
                                   self.with_position)

    def encode(self, req: Request, spectrum: NetworkSpectrum,
               paths: tuple[CandidatePath, ...],
               episode_pos: tuple[int, int] | None = None) -> np.ndarray:
        """Encode one decision point.

        ``paths`` are the precomputed candidates for (req.src, req.dst);
        if the graph offers fewer than K, the missing path groups encode
        as all-missing blocks with zero free spectrum. ``episode_pos`` is
        the 1-based (i, N) position within the episode, required in
        episode mode and ignored otherwise.
        """
        if self.with_position:
            if episode_pos is None:
                raise ValueError("episode position is required in ep mode")
            pos_i, pos_n = episode_pos
            if not 1 <= pos_i <= pos_n:
                raise ValueError(f"episode position {episode_pos} out of range")

        n_nodes = self.node_count
        f0 = float(self.slot_count)
        out = np.zeros(self.length, dtype=np.float64)
        out[req.src] = 1.0
        out[n_nodes + req.dst] = 1.0
        out[2 * n_nodes] = min(req.duration / self.tau_scale, 1.0)

        base = 2 * n_nodes + 1
        group = 2 * self.j_blocks + 3
        for k in range(self.k_paths):
            offset = base + k * group
            if k < len(paths):
                path = paths[k]
                n_slots = required_slots(req.bandwidth_gbps, path.modulation,
                                         self.slot_capacity_gbps)
                starts, sizes = spectrum.block_spans(path)
                usable = np.flatnonzero(sizes >= n_slots)
                for j in range(self.j_blocks):
                    if j < usable.size:
                        out[offset + 2 * j] = starts[usable[j]] / f0
                        out[offset + 2 * j + 1] = sizes[usable[j]] / f0
                    else:
                        out[offset + 2 * j] = MISSING_BLOCK[0]
                        out[offset + 2 * j + 1] = MISSING_BLOCK[1]
                out[offset + 2 * self.j_blocks] = n_slots / self.max_slots
                total = int(sizes.sum())
                avg = total / sizes.size if sizes.size else 0.0
                out[offset + 2 * self.j_blocks + 1] = avg / f0
                out[offset + 2 * self.j_blocks + 2] = total / f0
            else:
                for j in range(self.j_blocks):
                    out[offset + 2 * j] = MISSING_BLOCK[0]
                    out[offset + 2 * j + 1] = MISSING_BLOCK[1]
                # n, average and total stay zero for a nonexistent path

        if self.with_position:
            out[-1] = (pos_n - pos_i + 1) / pos_n
        return out
