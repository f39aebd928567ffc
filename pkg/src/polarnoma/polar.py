"""Polar encoding, code construction, and list decoding.

Conventions
-----------
* The transform is ``x = u @ T2^{(x)n}`` over GF(2) with kernel
  ``T2 = [[1, 0], [1, 1]]``, natural bit order (no bit-reversal).  The
  transform is its own inverse.
* LLRs are natural-log ``log P(bit=0)/P(bit=1)``; positive means bit 0.
* ``PolarCodeSpec.info_count`` counts payload bits placed on the unfrozen
  positions.  When a CRC is attached, the parity bits are part of that
  payload, so callers feed ``data_count = info_count - crc.degree`` data
  bits to :func:`encode`.

The list decoder keeps the exact path metric
``pm += log(1 + exp(-(1-2u) * llr))`` with the exact boxplus update, so a
full list (``2^K`` paths) reproduces maximum-likelihood decisions over the
codeword set; ties are broken by a stable sort on (metric, path index).
The per-path bookkeeping lives in a numba kernel: the receiver decodes
``users x levels`` codewords per frame and a pure-python path loop is far
too slow for the error-rate sweeps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .crc import CrcSpec, check_crc, attach_crc

__all__ = [
    "PolarCodeSpec",
    "DesignChannelParam",
    "polar_transform",
    "encode",
    "sc_decode",
    "scl_decode",
    "design_frozen_set",
    "channel_reliabilities",
    "save_frozen_set",
    "load_frozen_set",
]


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class DesignChannelParam:
    """Surrogate channel for frozen-set design.

    ``kind="bec"``: erasure probability ``value``; reliabilities follow the
    Bhattacharyya recursion z- = 2z - z^2, z+ = z^2.

    ``kind="biawgn"``: binary-input AWGN with noise variance ``value`` for
    unit-energy antipodal signalling; reliabilities follow the Gaussian
    approximation of density evolution on the LLR means.
    """

    kind: str
    value: float

    def __post_init__(self) -> None:
        if self.kind not in ("bec", "biawgn"):
            raise ValueError(f"unknown design channel kind {self.kind!r}")
        if self.kind == "bec" and not 0.0 < self.value < 1.0:
            raise ValueError("BEC erasure probability must lie in (0, 1)")
        if self.kind == "biawgn" and not self.value > 0.0:
            raise ValueError("noise variance must be positive")


@dataclass(frozen=True)
class PolarCodeSpec:
    """One polar code: length, payload size, frozen set, optional CRC."""

    block_length: int
    info_count: int
    frozen_indices: tuple[int, ...]
    crc: CrcSpec | None = None
    list_size: int = 8

    def __post_init__(self) -> None:
        n = self.block_length
        if n < 2 or n & (n - 1):
            raise ValueError(f"block length must be a power of two >= 2, got {n}")
        if not 1 <= self.info_count <= n:
            raise ValueError(f"info count {self.info_count} outside [1, {n}]")
        frozen = tuple(int(i) for i in self.frozen_indices)
        object.__setattr__(self, "frozen_indices", frozen)
        if len(frozen) != n - self.info_count:
            raise ValueError(
                f"{len(frozen)} frozen indices but block length {n} minus "
                f"info count {self.info_count} requires {n - self.info_count}"
            )
        if len(set(frozen)) != len(frozen):
            raise ValueError("frozen indices must be unique")
        if frozen and not all(0 <= i < n for i in frozen):
            raise ValueError("frozen index out of range")
        if self.crc is not None and self.data_count < 1:
            raise ValueError(
                f"info count {self.info_count} leaves no data bit after the "
                f"{self.crc.degree}-bit CRC"
            )
        if self.list_size < 1:
            raise ValueError("list size must be >= 1")

    @property
    def stages(self) -> int:
        return self.block_length.bit_length() - 1

    @property
    def data_count(self) -> int:
        """Payload bits excluding CRC parity."""
        return self.info_count - (self.crc.degree if self.crc else 0)


@lru_cache(maxsize=None)
def _code_tables(spec: PolarCodeSpec):
    n = spec.block_length
    frozen_mask = np.zeros(n, np.uint8)
    frozen_mask[list(spec.frozen_indices)] = 1
    info_positions = np.flatnonzero(frozen_mask == 0)
    return frozen_mask, info_positions


# ---------------------------------------------------------------------------
# transform / encode


def polar_transform(bits) -> np.ndarray:
    """Apply the n-fold Kronecker transform in place of a matrix product."""
    x = np.array(bits, dtype=np.uint8).ravel()
    n = x.size
    if n < 1 or n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    if x.size and x.max() > 1:
        raise ValueError("bit block may only contain 0 and 1")
    h = 1
    while h < n:
        x = x.reshape(-1, 2 * h)
        x[:, :h] ^= x[:, h:]
        h *= 2
    return x.reshape(n)


def encode(data_bits, spec: PolarCodeSpec) -> np.ndarray:
    """Map ``spec.data_count`` data bits to a codeword of ``spec.block_length``."""
    data = np.asarray(data_bits, dtype=np.uint8).ravel()
    if data.size != spec.data_count:
        raise ValueError(
            f"expected {spec.data_count} data bits, got {data.size}"
        )
    payload = attach_crc(data, spec.crc) if spec.crc is not None else data
    _, info_positions = _code_tables(spec)
    u = np.zeros(spec.block_length, np.uint8)
    u[info_positions] = payload
    return polar_transform(u)


# ---------------------------------------------------------------------------
# decoding


@njit(cache=True)
def _softplus(t):
    # log(1 + exp(t)) without overflow
    if t > 0.0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


@njit(cache=True)
def _boxplus(a, b):
    m = min(abs(a), abs(b))
    if (a < 0.0) != (b < 0.0):
        m = -m
    return m + math.log1p(math.exp(-abs(a + b))) - math.log1p(math.exp(-abs(a - b)))


@lru_cache(maxsize=None)
def _schedule(n_stages: int):
    # Fixed depth-first visit order of the decode tree: 0 = left-child LLRs,
    # 1 = right-child LLRs, 2 = combine child bits, 3 = leaf decision.
    kinds: list[int] = []
    deps: list[int] = []
    nodes: list[int] = []

    def visit(d: int, node: int) -> None:
        if d == n_stages:
            kinds.append(3)
            deps.append(d)
            nodes.append(node)
            return
        kinds.append(0)
        deps.append(d)
        nodes.append(node)
        visit(d + 1, 2 * node)
        kinds.append(1)
        deps.append(d)
        nodes.append(node)
        visit(d + 1, 2 * node + 1)
        kinds.append(2)
        deps.append(d)
        nodes.append(node)

    visit(0, 0)
    off = np.array(
        [sum(2 ** (n_stages - j) for j in range(d)) for d in range(n_stages + 1)],
        np.int64,
    )
    return (
        np.array(kinds, np.int8),
        np.array(deps, np.int64),
        np.array(nodes, np.int64),
        off,
    )


@njit(cache=True)
def _scl_kernel(chan_llr, frozen, list_size, kinds, deps, nodes, off):
    n_sym = chan_llr.shape[0]
    n_stages = off.shape[0] - 1
    n_paths = list_size
    width = 2 * n_sym - 1
    brows = (n_stages + 1) * n_sym

    # Per row: compact per-depth LLR segments (active node only) plus full
    # per-depth bit rows.  Paths reference rows through `rowof`; a fork only
    # copies rows for paths whose parent survived twice.
    llrs = np.zeros((n_paths, width), np.float64)
    bits = np.zeros((n_paths, brows), np.uint8)
    for p in range(n_paths):
        for i in range(n_sym):
            llrs[p, i] = chan_llr[i]
    pm = np.full(n_paths, np.inf)
    pm[0] = 0.0
    rowof = np.arange(n_paths)

    pmc = np.empty(2 * n_paths)
    pm_new = np.empty(n_paths)
    rowof_new = np.empty(n_paths, np.int64)
    bitbuf = np.empty(n_paths, np.uint8)
    pend_rank = np.empty(n_paths, np.int64)
    pend_src = np.empty(n_paths, np.int64)
    claimed = np.empty(n_paths, np.uint8)
    leaf_off = off[n_stages]

    for t in range(kinds.shape[0]):
        k = kinds[t]
        if k == 0:
            d = deps[t]
            half = (n_sym >> d) >> 1
            src = off[d]
            dst = off[d + 1]
            for p in range(n_paths):
                for i in range(half):
                    llrs[p, dst + i] = _boxplus(
                        llrs[p, src + i], llrs[p, src + half + i]
                    )
        elif k == 1:
            d = deps[t]
            size = n_sym >> d
            half = size >> 1
            src = off[d]
            dst = off[d + 1]
            brow = (d + 1) * n_sym + nodes[t] * size
            for p in range(n_paths):
                for i in range(half):
                    a = llrs[p, src + i]
                    b = llrs[p, src + half + i]
                    if bits[p, brow + i]:
                        llrs[p, dst + i] = b - a
                    else:
                        llrs[p, dst + i] = b + a
        elif k == 2:
            d = deps[t]
            size = n_sym >> d
            half = size >> 1
            crow = (d + 1) * n_sym + nodes[t] * size
            prow = d * n_sym + nodes[t] * size
            for p in range(n_paths):
                for i in range(half):
                    left = bits[p, crow + i]
                    right = bits[p, crow + half + i]
                    bits[p, prow + i] = left ^ right
                    bits[p, prow + half + i] = right
        else:
            i = nodes[t]
            brow = n_stages * n_sym + i
            if frozen[i]:
                for p in range(n_paths):
                    pm[p] += _softplus(-llrs[rowof[p], leaf_off])
                for r in range(n_paths):
                    bits[r, brow] = 0
            else:
                for p in range(n_paths):
                    lam = llrs[rowof[p], leaf_off]
                    pmc[2 * p] = pm[p] + _softplus(-lam)
                    pmc[2 * p + 1] = pm[p] + _softplus(lam)
                orderc = np.argsort(pmc, kind="mergesort")
                for r in range(n_paths):
                    claimed[r] = 0
                npend = 0
                for rank in range(n_paths):
                    c = orderc[rank]
                    parent_row = rowof[c >> 1]
                    pm_new[rank] = pmc[c]
                    bitbuf[rank] = np.uint8(c & 1)
                    if claimed[parent_row] == 0:
                        claimed[parent_row] = 1
                        rowof_new[rank] = parent_row
                    else:
                        pend_rank[npend] = rank
                        pend_src[npend] = parent_row
                        npend += 1
                if npend > 0:
                    fidx = 0
                    for r in range(n_paths):
                        if claimed[r] == 0:
                            src_row = pend_src[fidx]
                            for j in range(width):
                                llrs[r, j] = llrs[src_row, j]
                            for j in range(brows):
                                bits[r, j] = bits[src_row, j]
                            rowof_new[pend_rank[fidx]] = r
                            fidx += 1
                            if fidx == npend:
                                break
                for rank in range(n_paths):
                    pm[rank] = pm_new[rank]
                    rowof[rank] = rowof_new[rank]
                    bits[rowof[rank], brow] = bitbuf[rank]

    upaths = np.empty((n_paths, n_sym), np.uint8)
    for p in range(n_paths):
        r = rowof[p]
        for i in range(n_sym):
            upaths[p, i] = bits[r, n_stages * n_sym + i]
    return upaths, pm


def _prepare_llr(llr, spec: PolarCodeSpec) -> np.ndarray:
    arr = np.ascontiguousarray(llr, dtype=np.float64).ravel()
    if arr.size != spec.block_length:
        raise ValueError(
            f"expected {spec.block_length} LLRs, got {arr.size}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("channel LLRs must be finite")
    return arr


def scl_decode(llr, spec: PolarCodeSpec, list_size: int | None = None):
    """List decode; returns ``(data_bits, crc_ok)``.

    With a CRC the best-metric path that passes the check wins; if none
    passes, the best overall path is returned with ``crc_ok=False``.
    Codes without CRC always report ``crc_ok=True``.
    """
    n_paths = int(spec.list_size if list_size is None else list_size)
    if n_paths < 1:
        raise ValueError("list size must be >= 1")
    arr = _prepare_llr(llr, spec)
    frozen_mask, info_positions = _code_tables(spec)
    kinds, deps, nodes, off = _schedule(spec.stages)
    upaths, pm = _scl_kernel(arr, frozen_mask, n_paths, kinds, deps, nodes, off)
    order = np.argsort(pm, kind="stable")
    payloads = upaths[:, info_positions]
    if spec.crc is not None:
        for idx in order:
            if check_crc(payloads[idx], spec.crc):
                return payloads[idx, : spec.data_count].copy(), True
        return payloads[order[0], : spec.data_count].copy(), False
    return payloads[order[0]].copy(), True


def sc_decode(llr, spec: PolarCodeSpec):
    """Plain successive cancellation (list size 1)."""
    return scl_decode(llr, spec, list_size=1)


# ---------------------------------------------------------------------------
# construction


def _bhattacharyya(n_stages: int, erasure: float) -> np.ndarray:
    z = np.array([erasure], np.float64)
    for _ in range(n_stages):
        nxt = np.empty(2 * z.size, np.float64)
        nxt[0::2] = np.minimum(2.0 * z - z * z, 1.0)
        nxt[1::2] = z * z
        z = nxt
    return z


def _phi(x: float) -> float:
    # standard GA curve fit for E[tanh] under N(x, 2x)
    if x <= 0.0:
        return 1.0
    if x < 10.0:
        return math.exp(-0.4527 * x**0.86 + 0.0218)
    return math.sqrt(math.pi / x) * math.exp(-x / 4.0) * (1.0 - 10.0 / (7.0 * x))


def _phi_inv(y: float) -> float:
    if y >= 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while _phi(hi) > y:
        hi *= 2.0
        if hi > 1e9:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _phi(mid) > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _ga_means(n_stages: int, noise_variance: float) -> np.ndarray:
    m = np.array([2.0 / noise_variance], np.float64)
    for _ in range(n_stages):
        nxt = np.empty(2 * m.size, np.float64)
        for k, mk in enumerate(m):
            fm = _phi(mk)
            if fm < 1e-250:
                # deep in the asymptotic tail the check update shifts the
                # mean by 4*log 2
                nxt[2 * k] = mk - 4.0 * math.log(2.0)
            else:
                nxt[2 * k] = _phi_inv(1.0 - (1.0 - fm) ** 2)
            nxt[2 * k + 1] = 2.0 * mk
        m = nxt
    return m


def channel_reliabilities(block_length: int, design_channel: DesignChannelParam) -> np.ndarray:
    """Per-index reliability metric; larger is more reliable."""
    if block_length < 2 or block_length & (block_length - 1):
        raise ValueError("block length must be a power of two >= 2")
    n_stages = block_length.bit_length() - 1
    if design_channel.kind == "bec":
        return 1.0 - _bhattacharyya(n_stages, design_channel.value)
    return _ga_means(n_stages, design_channel.value)


def design_frozen_set(
    block_length: int, info_count: int, design_channel: DesignChannelParam
) -> tuple[int, ...]:
    """Indices of the ``block_length - info_count`` least reliable bit channels.

    Ties are resolved toward the lower index (stable sort).
    """
    if not 1 <= info_count <= block_length:
        raise ValueError(
            f"info count {info_count} outside [1, {block_length}]"
        )
    rel = channel_reliabilities(block_length, design_channel)
    order = np.argsort(rel, kind="stable")  # least reliable first
    frozen = np.sort(order[: block_length - info_count])
    return tuple(int(i) for i in frozen)


# ---------------------------------------------------------------------------
# frozen-set sidecar files


def save_frozen_set(
    path,
    block_length: int,
    info_count: int,
    frozen_indices,
    design_channel: DesignChannelParam | None = None,
) -> None:
    doc = {
        "block_length": int(block_length),
        "info_count": int(info_count),
        "design_channel": (
            None
            if design_channel is None
            else {"kind": design_channel.kind, "value": design_channel.value}
        ),
        "frozen_indices": [int(i) for i in frozen_indices],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_frozen_set(path):
    """Read a sidecar; returns ``(block_length, info_count, frozen, design_channel)``."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    frozen = tuple(int(i) for i in doc["frozen_indices"])
    dc = doc.get("design_channel")
    param = None if dc is None else DesignChannelParam(dc["kind"], float(dc["value"]))
    return int(doc["block_length"]), int(doc["info_count"]), frozen, param
