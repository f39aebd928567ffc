"""Bit-level capacity estimation and capacity-rule rate design.

All estimates are plug-in Monte Carlo: draw (label, noise) pairs, evaluate
exact conditional Gaussian likelihood sums over the matching
subconstellations, and average the log-ratios.  Level l is conditioned on
the true lower-level bits (chain-rule decomposition), so the per-level
values sum to the full symbol mutual information in expectation.

Densities use the complex-Gaussian convention exp(-|y-x|^2 / sigma2) with
sigma2 the total noise variance; prefactors cancel in every ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .mapping import LevelMapper, RateProfile

__all__ = [
    "BitLevelCapacities",
    "RateDesign",
    "InfeasibleRateError",
    "estimate_bit_level_capacities",
    "estimate_symbol_mi",
    "biawgn_capacity",
    "biawgn_noise_for_capacity",
    "largest_remainder_counts",
    "design_rates",
    "validate_profile",
    "snr_db_to_noise_variance",
]

_LN2 = math.log(2.0)


def snr_db_to_noise_variance(snr_db: float) -> float:
    """Unit-energy symbols: Es/N0 = 1/sigma2, so sigma2 = 10**(-snr/10)."""
    return 10.0 ** (-float(snr_db) / 10.0)


def _resolve_seed(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


@dataclass(frozen=True)
class BitLevelCapacities:
    """Monte Carlo per-level capacities (bits/level) with standard errors."""

    noise_variance: float
    num_samples: int
    values: tuple[float, ...]
    std_errors: tuple[float, ...]

    @property
    def total(self) -> float:
        return float(sum(self.values))

    @property
    def snr(self) -> float:
        """Linear SNR under the unit-energy convention (1/sigma2)."""
        return 1.0 / self.noise_variance


def _draw_received(mapper: LevelMapper, sigma2: float, num: int, rng) -> tuple:
    labels = rng.integers(0, mapper.points.size, size=num)
    noise = (rng.standard_normal(num) + 1j * rng.standard_normal(num)) * math.sqrt(
        sigma2 / 2.0
    )
    return labels, mapper.points[labels] + noise, noise


def estimate_bit_level_capacities(
    mapper: LevelMapper,
    noise_variance: float,
    num_samples: int = 100_000,
    seed=0,
) -> BitLevelCapacities:
    """Per-level conditional mutual informations on the single-user AWGN channel.

    Each level draws its own independent sample set (seeded spawn), so the
    reported standard errors are independent across levels.
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    if num_samples < 2:
        raise ValueError("need at least two samples")
    levels = mapper.levels
    streams = _resolve_seed(seed).spawn(levels)
    values = []
    errors = []
    for l in range(levels):
        rng = np.random.default_rng(streams[l])
        labels, y, _ = _draw_received(mapper, noise_variance, num_samples, rng)
        prefix = labels & ((1 << l) - 1)
        bit = (labels >> l) & 1
        exts = (np.arange(1 << (levels - l - 1)) << (l + 1))[:, None]
        lse = []
        for b in (0, 1):
            cand = mapper.points[prefix[None, :] + (b << l) + exts]
            d = np.abs(y[None, :] - cand) ** 2
            lse.append(logsumexp(-d / noise_variance, axis=0))
        num = np.where(bit == 0, lse[0], lse[1])
        den = np.logaddexp(lse[0], lse[1]) - _LN2
        per_sample = (num - den) / _LN2
        values.append(float(per_sample.mean()))
        errors.append(float(per_sample.std(ddof=1) / math.sqrt(num_samples)))
    return BitLevelCapacities(
        noise_variance=float(noise_variance),
        num_samples=int(num_samples),
        values=tuple(values),
        std_errors=tuple(errors),
    )


def estimate_symbol_mi(
    mapper: LevelMapper,
    noise_variance: float,
    num_samples: int = 100_000,
    seed=0,
) -> tuple[float, float]:
    """Plug-in estimate of I(x; y) in bits with its standard error."""
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    if num_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(_resolve_seed(seed))
    _, y, noise = _draw_received(mapper, noise_variance, num_samples, rng)
    d = np.abs(y[:, None] - mapper.points[None, :]) ** 2
    mix = logsumexp(-d / noise_variance, axis=1) - math.log(mapper.points.size)
    true_ll = -np.abs(noise) ** 2 / noise_variance
    per_sample = (true_ll - mix) / _LN2
    return float(per_sample.mean()), float(
        per_sample.std(ddof=1) / math.sqrt(num_samples)
    )


# ---------------------------------------------------------------------------
# binary-input AWGN surrogate (frozen-set design)

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(96)


def biawgn_capacity(noise_variance: float) -> float:
    """Capacity of unit-energy antipodal signalling over real AWGN, in bits."""
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    s = math.sqrt(noise_variance)
    y = 1.0 + math.sqrt(2.0) * s * _GH_NODES
    llr = 2.0 * y / noise_variance
    loss = np.logaddexp(0.0, -llr) / _LN2
    return float(1.0 - np.dot(_GH_WEIGHTS, loss) / math.sqrt(math.pi))


def biawgn_noise_for_capacity(capacity: float) -> float:
    """Invert :func:`biawgn_capacity` by bisection."""
    if not 0.0 < capacity < 1.0:
        raise ValueError("capacity must lie strictly between 0 and 1")
    lo, hi = 1e-4, 1e4
    if biawgn_capacity(lo) < capacity or biawgn_capacity(hi) > capacity:
        raise ValueError(f"capacity {capacity} outside invertible range")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if biawgn_capacity(mid) > capacity:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


# ---------------------------------------------------------------------------
# rate design


class InfeasibleRateError(ValueError):
    """Target rate not reachable anywhere on the SNR grid."""


def largest_remainder_counts(weights, total: int, cap: int) -> tuple[int, ...]:
    """Round nonnegative weights to integers in [0, cap] summing to ``total``.

    Floor first, then hand out the missing units by descending fractional
    part (ties toward the lower index); retract by ascending fractional part
    if the floors overshoot.
    """
    w = np.clip(np.asarray(weights, dtype=float), 0.0, float(cap))
    if total < 0 or total > cap * w.size:
        raise ValueError(f"total {total} impossible for {w.size} levels capped at {cap}")
    counts = np.floor(w).astype(int)
    frac = w - counts
    idx = np.arange(w.size)
    add_order = np.lexsort((idx, -frac))
    drop_order = np.lexsort((idx, frac))
    diff = int(total - counts.sum())
    while diff > 0:
        for i in add_order:
            if diff == 0:
                break
            if counts[i] < cap:
                counts[i] += 1
                diff -= 1
    while diff < 0:
        for i in drop_order:
            if diff == 0:
                break
            if counts[i] > 0:
                counts[i] -= 1
                diff += 1
    return tuple(int(c) for c in counts)


@dataclass(frozen=True)
class RateDesign:
    design_snr_db: float
    noise_variance: float
    profile: RateProfile
    capacities: BitLevelCapacities
    suppression_candidates: tuple[int, ...]


def design_rates(
    mapper: LevelMapper,
    block_length: int,
    target_rate: float,
    snr_grid_db,
    *,
    num_samples: int = 100_000,
    seed=0,
    crc_degree: int = 8,
) -> RateDesign:
    """Smallest grid SNR whose summed bit-level capacities reach the target.

    The per-level payloads follow the capacity rule K_l ~ N*C_l, rebalanced
    by largest remainder so they sum to round(N * target_rate).  Levels whose
    payload does not exceed the CRC overhead are reported as suppression
    candidates (transmit all-zero instead); scenario configs may suppress
    further levels that are technically above that bar but still useless.
    """
    if target_rate <= 0 or target_rate > mapper.levels:
        raise ValueError(
            f"target rate {target_rate} outside (0, {mapper.levels}] bits/symbol"
        )
    grid = sorted(float(s) for s in snr_grid_db)
    if not grid:
        raise ValueError("empty SNR grid")
    base = _resolve_seed(seed)
    caps = None
    chosen = None
    for idx, snr_db in enumerate(grid):
        sigma2 = snr_db_to_noise_variance(snr_db)
        est = estimate_bit_level_capacities(
            mapper, sigma2, num_samples, seed=np.random.SeedSequence((base.entropy, idx))
        )
        if est.total >= target_rate:
            caps, chosen = est, snr_db
            break
    if caps is None:
        raise InfeasibleRateError(
            f"target {target_rate} bits/symbol unreachable on grid up to {grid[-1]} dB"
        )
    k_total = round(block_length * target_rate)
    weights = [block_length * c for c in caps.values]
    counts = largest_remainder_counts(weights, k_total, cap=block_length)
    profile = RateProfile(block_length=block_length, info_counts=counts)
    candidates = tuple(
        l for l, k in enumerate(counts) if 0 < k <= crc_degree
    )
    return RateDesign(
        design_snr_db=chosen,
        noise_variance=caps.noise_variance,
        profile=profile,
        capacities=caps,
        suppression_candidates=candidates,
    )


@dataclass(frozen=True)
class ValidationResult:
    """``bound_only`` marks a pass with zero observed errors: the run only
    shows FER <= ci_high rather than measuring it."""

    ok: bool
    fer: float
    ci_low: float
    ci_high: float
    threshold: float
    frames: int
    frame_errors: int
    bound_only: bool


def validate_profile(
    sim_config,
    snr_db: float,
    fer_threshold: float,
    *,
    max_frames: int = 2000,
    min_frame_errors: int = 50,
    workers: int = 1,
) -> ValidationResult:
    """Run the link at one SNR and compare the measured FER to a threshold."""
    from .simulate import run_fer  # deferred: simulate depends on this module

    cfg = replace(
        sim_config,
        snr_grid_db=(float(snr_db),),
        max_frames=int(max_frames),
        min_frame_errors=int(min_frame_errors),
    )
    result = run_fer(cfg, workers=workers)
    point = result.points[0]
    return ValidationResult(
        ok=bool(point.fer <= fer_threshold),
        fer=point.fer,
        ci_low=point.ci_low,
        ci_high=point.ci_high,
        threshold=float(fer_threshold),
        frames=point.frames,
        frame_errors=point.frame_errors,
        bound_only=point.frame_errors == 0,
    )
