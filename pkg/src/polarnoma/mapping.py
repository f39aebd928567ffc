"""Multi-level square-QAM mapping with set-partition labeling.

A label is ``levels`` bits (c_0, ..., c_{L-1}), least significant level
first.  The mapper forms the Gaussian-integer sum ``sum_l c_l (1+1j)**l``,
reduces each coordinate modulo ``2**(L/2)`` into [0, 2**(L/2)), recenters
with ``v -> 2v - (2**(L/2) - 1)``, and scales the resulting square grid to
unit average energy.  The construction is a bijection from labels onto the
grid, and fixing the first ``l`` bits selects a coset whose minimum squared
distance grows by a factor of 2 per level, which is what makes level-wise
successive demapping work.

Only even level counts are supported (square constellations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LevelMapper", "RateProfile", "split_bits"]


class LevelMapper:
    """Precomputed label-to-symbol tables for one even level count."""

    def __init__(self, levels: int):
        if levels < 2 or levels % 2:
            raise ValueError(f"level count must be even and >= 2, got {levels}")
        self.levels = int(levels)
        side = 1 << (levels // 2)
        labels = np.arange(1 << levels)
        bits = (labels[:, None] >> np.arange(levels)[None, :]) & 1
        weights = (1 + 1j) ** np.arange(levels)
        raw = bits.astype(np.complex128) @ weights
        re = np.mod(np.rint(raw.real).astype(np.int64), side)
        im = np.mod(np.rint(raw.imag).astype(np.int64), side)
        grid = (2 * re - (side - 1)) + 1j * (2 * im - (side - 1))
        energy = np.mean(np.abs(grid) ** 2)
        self.side = side
        self.scale = 1.0 / np.sqrt(energy)
        #: unit-energy symbol for every integer label, bit l at weight 2**l
        self.points = grid * self.scale
        self.points.setflags(write=False)

    def __repr__(self) -> str:
        return f"LevelMapper(levels={self.levels})"

    def __eq__(self, other) -> bool:
        return isinstance(other, LevelMapper) and other.levels == self.levels

    def __hash__(self) -> int:
        return hash(("LevelMapper", self.levels))

    def map_label(self, label_bits) -> complex:
        """Single label (c_0, ..., c_{L-1}) to its unit-energy symbol."""
        bits = np.asarray(label_bits, dtype=np.uint8).ravel()
        if bits.size != self.levels:
            raise ValueError(f"expected {self.levels} label bits, got {bits.size}")
        if bits.size and bits.max() > 1:
            raise ValueError("label bits must be 0 or 1")
        idx = int(np.dot(bits, 1 << np.arange(self.levels)))
        return complex(self.points[idx])

    def frame_labels(self, level_bits) -> np.ndarray:
        """Integer labels for a (levels, frame) array of coded bits."""
        arr = np.asarray(level_bits, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != self.levels:
            raise ValueError(
                f"expected shape ({self.levels}, frame), got {arr.shape}"
            )
        if arr.size and (arr.min() < 0 or arr.max() > 1):
            raise ValueError("label bits must be 0 or 1")
        return (arr * (1 << np.arange(self.levels))[:, None]).sum(axis=0)

    def map_frame(self, level_bits) -> np.ndarray:
        """Per-level codeword rows to a unit-energy symbol frame."""
        return self.points[self.frame_labels(level_bits)]

    def subconstellation(self, prefix_bits):
        """Points consistent with fixed bits (c_0, ..., c_{l-1}).

        Returns a list of ``(symbol, remaining_bits)`` pairs, one per
        extension of the prefix, remaining bits ordered (c_l, ..., c_{L-1}).
        """
        prefix = np.asarray(prefix_bits, dtype=np.uint8).ravel()
        depth = prefix.size
        if depth > self.levels:
            raise ValueError(f"prefix longer than {self.levels} levels")
        if depth and prefix.max() > 1:
            raise ValueError("prefix bits must be 0 or 1")
        base = int(np.dot(prefix, 1 << np.arange(depth))) if depth else 0
        rest = self.levels - depth
        out = []
        for ext in range(1 << rest):
            label = base + (ext << depth)
            rem = tuple((ext >> j) & 1 for j in range(rest))
            out.append((complex(self.points[label]), rem))
        return out


@dataclass(frozen=True)
class RateProfile:
    """Per-level payload allocation for one block length.

    ``info_counts[l]`` is the designed payload (CRC included) of level l;
    suppressed levels stay in the tuple but carry no bits and transmit the
    all-zero codeword.
    """

    block_length: int
    info_counts: tuple[int, ...]
    active_levels: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        counts = tuple(int(k) for k in self.info_counts)
        object.__setattr__(self, "info_counts", counts)
        active = self.active_levels
        if active is None:
            active = tuple(k > 0 for k in counts)
        active = tuple(bool(a) for a in active)
        object.__setattr__(self, "active_levels", active)
        if len(active) != len(counts):
            raise ValueError("active mask length must match level count")
        if not counts:
            raise ValueError("need at least one level")
        if any(k < 0 or k > self.block_length for k in counts):
            raise ValueError("per-level info count outside [0, block length]")
        if not any(a and k > 0 for a, k in zip(active, counts)):
            raise ValueError("profile carries no bits on any active level")
        if any(a and k == 0 for a, k in zip(active, counts)):
            raise ValueError("active level with zero info bits")

    @property
    def levels(self) -> int:
        return len(self.info_counts)

    @property
    def effective_counts(self) -> tuple[int, ...]:
        return tuple(
            k if a else 0 for k, a in zip(self.info_counts, self.active_levels)
        )

    @property
    def total_info(self) -> int:
        """Payload bits per user frame over active levels."""
        return sum(self.effective_counts)


def split_bits(bits, profile: RateProfile) -> list[np.ndarray]:
    """Cut a ``profile.total_info``-bit block into contiguous per-level runs.

    Level 0 bits come first; inactive levels receive an empty array.
    """
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size != profile.total_info:
        raise ValueError(
            f"expected {profile.total_info} bits, got {arr.size}"
        )
    out = []
    pos = 0
    for count in profile.effective_counts:
        out.append(arr[pos : pos + count].copy())
        pos += count
    return out
