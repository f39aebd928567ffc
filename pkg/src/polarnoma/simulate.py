"""Monte Carlo frame-error-rate sweeps for the multi-user link.

A frame is one fading/noise realization carrying every user's coded block.
Error counting is per user frame: each (channel frame, user) pair whose
decoded payload differs from the transmitted one on any level counts as one
frame error, so ``frames = channel_frames * num_users`` in all reports.

Reproducibility contract: every channel frame derives its generators from
``SeedSequence((master_seed, snr_index, frame_index))`` and the sweep stops
only at fixed batch boundaries, so results (and the CSV bytes) are identical
for any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .capacity import (
    biawgn_noise_for_capacity,
    estimate_bit_level_capacities,
    snr_db_to_noise_variance,
)
from .crc import CrcSpec
from .mapping import LevelMapper, RateProfile
from .polar import DesignChannelParam, PolarCodeSpec, design_frozen_set, encode, load_frozen_set
from .scma import RECEIVE_MODES, MpaOptions, ScmaGraph, msd_receive, sample_channel, transmit

__all__ = [
    "SimConfig",
    "FrameOutcome",
    "FerPoint",
    "FerResult",
    "FER_CSV_HEADER",
    "build_level_specs",
    "run_frame",
    "run_fer",
    "clopper_pearson",
    "fer_csv_text",
    "write_fer_csv",
    "load_sim_config",
    "default_scenario",
]


@dataclass(frozen=True)
class SimConfig:
    """Everything one sweep needs; hashable and picklable.

    ``info_counts[l] == 0`` suppresses level l (all-zero codeword, never
    decoded).  ``max_frames`` caps *channel* frames per SNR point;
    ``min_frame_errors`` counts user-frame errors.  ``frozen_set_paths``
    optionally pins per-level sidecar files instead of designing frozen sets
    from the capacity rule at ``design_snr_db``.  ``fixed_channel_frames``
    replaces the stopping rule with an exact per-point frame count, which
    keeps paired-seed mode comparisons on identical frame sets.
    """

    graph: ScmaGraph
    block_length: int
    info_counts: tuple[int, ...]
    snr_grid_db: tuple[float, ...]
    design_snr_db: float
    mode: str = "standard"
    list_size: int = 8
    mpa_iterations: int = 1
    crc_degree: int = 8
    crc_poly: int = 0x107
    master_seed: int = 20260814
    design_seed: int = 7
    design_samples: int = 200_000
    min_frame_errors: int = 100
    max_frames: int = 20_000
    frames_per_batch: int = 32
    use_max_log: bool = False
    llr_clip: float | None = 40.0
    max_inner_iterations: int = 4
    frozen_set_paths: tuple[str | None, ...] | None = None
    fixed_channel_frames: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "info_counts", tuple(int(k) for k in self.info_counts))
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.mode not in RECEIVE_MODES:
            raise ValueError(f"mode must be one of {RECEIVE_MODES}, got {self.mode!r}")
        levels = len(self.info_counts)
        if levels < 2 or levels % 2:
            raise ValueError("need an even number of levels >= 2")
        if not self.snr_grid_db:
            raise ValueError("empty SNR grid")
        if any(a >= b for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise ValueError("SNR grid must be strictly increasing")
        if not any(self.info_counts):
            raise ValueError("every level is suppressed; nothing to simulate")
        for l, k in enumerate(self.info_counts):
            if k < 0 or k > self.block_length:
                raise ValueError(f"level {l} payload {k} outside [0, {self.block_length}]")
            if 0 < k <= self.crc_degree + 1:
                raise ValueError(
                    f"level {l} payload {k} leaves no room behind the CRC; "
                    "suppress it (set 0) or enlarge it"
                )
        if self.min_frame_errors < 1 or self.max_frames < 1 or self.frames_per_batch < 1:
            raise ValueError("stopping parameters must be positive")
        if self.frozen_set_paths is not None and len(self.frozen_set_paths) != levels:
            raise ValueError("one frozen-set path (or None) per level required")
        if self.fixed_channel_frames is not None:
            fixed = tuple(int(f) for f in self.fixed_channel_frames)
            object.__setattr__(self, "fixed_channel_frames", fixed)
            if len(fixed) != len(self.snr_grid_db) or any(f < 1 for f in fixed):
                raise ValueError("need one positive frame count per grid point")

    @property
    def levels(self) -> int:
        return len(self.info_counts)

    def mapper(self) -> LevelMapper:
        return LevelMapper(self.levels)

    def profile(self) -> RateProfile:
        return RateProfile(block_length=self.block_length, info_counts=self.info_counts)

    def crc_spec(self) -> CrcSpec:
        return CrcSpec(degree=self.crc_degree, poly=self.crc_poly)

    def mpa_options(self) -> MpaOptions:
        return MpaOptions(
            iterations=self.mpa_iterations,
            use_max_log=self.use_max_log,
            llr_clip=self.llr_clip,
            max_inner_iterations=self.max_inner_iterations,
        )


# ---------------------------------------------------------------------------
# code construction


_SPEC_CACHE: dict[tuple, tuple] = {}


def build_level_specs(cfg: SimConfig) -> tuple:
    """Per-level :class:`PolarCodeSpec` tuple (``None`` on suppressed levels).

    Without sidecar files the frozen set of each active level comes from a
    Gaussian-approximation design on the binary-input AWGN surrogate whose
    capacity equals that level's Monte Carlo capacity at the design SNR.
    Deterministic given the config (own seed, independent of the sweep seed).
    """
    key = (
        cfg.block_length,
        cfg.info_counts,
        cfg.design_snr_db,
        cfg.crc_degree,
        cfg.crc_poly,
        cfg.list_size,
        cfg.design_seed,
        cfg.design_samples,
        cfg.frozen_set_paths,
    )
    hit = _SPEC_CACHE.get(key)
    if hit is not None:
        return hit

    crc = cfg.crc_spec()
    specs: list[PolarCodeSpec | None] = []
    if cfg.frozen_set_paths is not None:
        for l, (k, path) in enumerate(zip(cfg.info_counts, cfg.frozen_set_paths)):
            if k == 0:
                specs.append(None)
                continue
            if path is None:
                raise ValueError(f"active level {l} has no frozen-set sidecar")
            n, k_file, frozen, _ = load_frozen_set(path)
            if n != cfg.block_length or k_file != k:
                raise ValueError(
                    f"sidecar {path} is a ({n}, {k_file}) design, level {l} "
                    f"needs ({cfg.block_length}, {k})"
                )
            specs.append(
                PolarCodeSpec(cfg.block_length, k, frozen, crc=crc, list_size=cfg.list_size)
            )
    else:
        caps = estimate_bit_level_capacities(
            cfg.mapper(),
            snr_db_to_noise_variance(cfg.design_snr_db),
            num_samples=cfg.design_samples,
            seed=cfg.design_seed,
        )
        for l, k in enumerate(cfg.info_counts):
            if k == 0:
                specs.append(None)
                continue
            c = min(max(caps.values[l], 1e-3), 1.0 - 1e-3)
            channel = DesignChannelParam("biawgn", biawgn_noise_for_capacity(c))
            frozen = design_frozen_set(cfg.block_length, k, channel)
            specs.append(
                PolarCodeSpec(cfg.block_length, k, frozen, crc=crc, list_size=cfg.list_size)
            )
    out = tuple(specs)
    _SPEC_CACHE[key] = out
    return out


# ---------------------------------------------------------------------------
# single frame


@dataclass(frozen=True)
class FrameOutcome:
    """Per-user verdicts for one channel frame."""

    user_errors: tuple[bool, ...]
    first_error_level: tuple[int, ...]  # -1 when the user frame is clean

    @property
    def error_count(self) -> int:
        return sum(self.user_errors)


def _simulate_frame(cfg: SimConfig, specs, mapper: LevelMapper, snr_index: int, frame_index: int) -> FrameOutcome:
    sigma2 = snr_db_to_noise_variance(cfg.snr_grid_db[snr_index])
    seed = np.random.SeedSequence(entropy=(cfg.master_seed, snr_index, frame_index))
    data_rng, chan_rng = (np.random.default_rng(s) for s in seed.spawn(2))

    n_users = cfg.graph.num_users
    level_bits = np.zeros((n_users, cfg.levels, cfg.block_length), np.uint8)
    payloads: list[list[np.ndarray | None]] = [[None] * cfg.levels for _ in range(n_users)]
    for u in range(n_users):
        for l, spec in enumerate(specs):
            if spec is None:
                continue
            bits = data_rng.integers(0, 2, size=spec.data_count, dtype=np.uint8)
            payloads[u][l] = bits
            level_bits[u, l] = encode(bits, spec)

    symbols = np.stack([mapper.map_frame(level_bits[u]) for u in range(n_users)])
    channel = sample_channel(cfg.graph, sigma2, chan_rng)
    received = transmit(cfg.graph, symbols, channel, chan_rng)
    result = msd_receive(
        received,
        channel,
        cfg.graph,
        specs,
        mapper,
        mode=cfg.mode,
        options=cfg.mpa_options(),
        true_level_bits=level_bits if cfg.mode == "genie" else None,
    )

    errors = []
    firsts = []
    for u in range(n_users):
        first = -1
        for l, spec in enumerate(specs):
            if spec is None:
                continue
            if not np.array_equal(result.data_bits[u][l], payloads[u][l]):
                first = l
                break
        errors.append(first >= 0)
        firsts.append(first)
    return FrameOutcome(user_errors=tuple(errors), first_error_level=tuple(firsts))


def run_frame(cfg: SimConfig, snr_index: int, frame_index: int) -> FrameOutcome:
    """Simulate one seeded channel frame end to end."""
    if not 0 <= snr_index < len(cfg.snr_grid_db):
        raise ValueError(f"snr_index {snr_index} outside the grid")
    if frame_index < 0:
        raise ValueError("frame_index must be nonnegative")
    return _simulate_frame(cfg, build_level_specs(cfg), cfg.mapper(), snr_index, frame_index)


# ---------------------------------------------------------------------------
# sweeps


_WORKER_CTX = None


def _worker_init(cfg: SimConfig) -> None:
    global _WORKER_CTX
    _WORKER_CTX = (cfg, build_level_specs(cfg), cfg.mapper())


def _worker_frame(task):
    snr_index, frame_index = task
    cfg, specs, mapper = _WORKER_CTX
    return _simulate_frame(cfg, specs, mapper, snr_index, frame_index)


@dataclass(frozen=True)
class FerPoint:
    """One SNR point; ``frames`` counts user frames."""

    snr_db: float
    channel_frames: int
    frames: int
    frame_errors: int
    fer: float
    ci_low: float
    ci_high: float
    first_error_histogram: tuple[int, ...]
    per_frame_errors: tuple[int, ...] | None = None


@dataclass(frozen=True)
class FerResult:
    config: SimConfig
    points: tuple[FerPoint, ...]

    def csv_text(self) -> str:
        return fer_csv_text(self)

    def write_csv(self, path) -> None:
        write_fer_csv(self, path)


def clopper_pearson(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval."""
    if not 0 <= errors <= trials or trials < 1:
        raise ValueError("need 0 <= errors <= trials, trials >= 1")
    alpha = 1.0 - confidence
    low = 0.0 if errors == 0 else float(stats.beta.ppf(alpha / 2, errors, trials - errors + 1))
    high = (
        1.0 if errors == trials else float(stats.beta.ppf(1 - alpha / 2, errors + 1, trials - errors))
    )
    return low, high


def run_fer(cfg: SimConfig, workers: int = 1, keep_outcomes: bool = False, on_point=None) -> FerResult:
    """Sweep the SNR grid until each point hits the stopping rule.

    A point stops once it has ``min_frame_errors`` user-frame errors or
    ``max_frames`` channel frames, checked only at ``frames_per_batch``
    boundaries (``fixed_channel_frames`` overrides both).  Frame outcomes
    depend on (config, snr_index, frame_index) alone, so any ``workers``
    count gives identical results.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    specs = build_level_specs(cfg)
    mapper = cfg.mapper()
    n_users = cfg.graph.num_users
    executor = None
    if workers > 1:
        executor = ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(cfg,)
        )
    points = []
    try:
        for snr_index, snr_db in enumerate(cfg.snr_grid_db):
            cap = cfg.max_frames
            if cfg.fixed_channel_frames is not None:
                cap = cfg.fixed_channel_frames[snr_index]
            done = 0
            errors = 0
            hist = [0] * cfg.levels
            per_frame: list[int] = []
            while True:
                batch = min(cfg.frames_per_batch, cap - done)
                tasks = [(snr_index, done + i) for i in range(batch)]
                if executor is not None:
                    outcomes = list(executor.map(_worker_frame, tasks))
                else:
                    outcomes = [_simulate_frame(cfg, specs, mapper, *t) for t in tasks]
                for oc in outcomes:
                    errors += oc.error_count
                    per_frame.append(oc.error_count)
                    for lvl in oc.first_error_level:
                        if lvl >= 0:
                            hist[lvl] += 1
                done += batch
                if done >= cap:
                    break
                if cfg.fixed_channel_frames is None and errors >= cfg.min_frame_errors:
                    break
            frames = done * n_users
            low, high = clopper_pearson(errors, frames)
            point = FerPoint(
                snr_db=snr_db,
                channel_frames=done,
                frames=frames,
                frame_errors=errors,
                fer=errors / frames,
                ci_low=low,
                ci_high=high,
                first_error_histogram=tuple(hist),
                per_frame_errors=tuple(per_frame) if keep_outcomes else None,
            )
            points.append(point)
            if on_point is not None:
                on_point(point)
    finally:
        if executor is not None:
            executor.shutdown()
    return FerResult(config=cfg, points=tuple(points))


# ---------------------------------------------------------------------------
# CSV


FER_CSV_HEADER = "snr_db,frames,frame_errors,fer,ci_low,ci_high,mode,list_size,mpa_iters"


def fer_csv_text(result: FerResult) -> str:
    cfg = result.config
    lines = [FER_CSV_HEADER]
    for p in result.points:
        lines.append(
            f"{p.snr_db:g},{p.frames},{p.frame_errors},{p.fer:.10g},"
            f"{p.ci_low:.10g},{p.ci_high:.10g},{cfg.mode},{cfg.list_size},{cfg.mpa_iterations}"
        )
    return "\n".join(lines) + "\n"


def write_fer_csv(result: FerResult, path) -> None:
    Path(path).write_text(fer_csv_text(result), encoding="utf-8")


# ---------------------------------------------------------------------------
# config files


_KEY_SECTIONS = {
    "code": {
        "block_length", "info_counts", "design_snr_db", "list_size",
        "crc_degree", "crc_poly", "design_seed", "design_samples",
        "frozen_set_paths",
    },
    "detector": {
        "mode", "mpa_iterations", "use_max_log", "llr_clip", "max_inner_iterations",
    },
    "sweep": {
        "snr_grid_db", "master_seed", "min_frame_errors", "max_frames",
        "frames_per_batch",
    },
}
_ALL_KEYS = set().union(*_KEY_SECTIONS.values())


def _config_from_dict(doc: dict) -> SimConfig:
    fields: dict = {}
    allocation = None
    for key, value in doc.items():
        if key == "graph":
            allocation = value.get("allocation") if isinstance(value, dict) else value
        elif key == "allocation":
            allocation = value
        elif isinstance(value, dict):
            if key not in _KEY_SECTIONS:
                raise ValueError(f"unknown config section {key!r}")
            unknown = set(value) - _KEY_SECTIONS[key]
            if unknown:
                raise ValueError(f"unknown keys in [{key}]: {sorted(unknown)}")
            fields.update(value)
        elif key in _ALL_KEYS:
            fields[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    graph = ScmaGraph(tuple(tuple(r) for r in allocation)) if allocation else ScmaGraph.default()
    clip = fields.get("llr_clip")
    if clip is not None and clip <= 0:
        fields["llr_clip"] = None  # nonpositive disables clipping
    if "frozen_set_paths" in fields and fields["frozen_set_paths"] is not None:
        fields["frozen_set_paths"] = tuple(
            (None if p in ("", None) else str(p)) for p in fields["frozen_set_paths"]
        )
    missing = {"block_length", "info_counts", "design_snr_db", "snr_grid_db"} - set(fields)
    if missing:
        raise ValueError(f"config is missing required keys: {sorted(missing)}")
    return SimConfig(graph=graph, **fields)


def load_sim_config(path) -> SimConfig:
    """Read a scenario file (.toml or .json)."""
    p = Path(path)
    if p.suffix == ".toml":
        doc = tomllib.loads(p.read_text(encoding="utf-8"))
    elif p.suffix == ".json":
        doc = json.loads(p.read_text(encoding="utf-8"))
    else:
        raise ValueError(f"unsupported config format {p.suffix!r} (use .toml or .json)")
    return _config_from_dict(doc)


def default_scenario() -> SimConfig:
    """Bundled 4-subcarrier, 6-user scenario with a calibrated SNR grid."""
    text = resources.files("polarnoma").joinpath("data/default_scenario.toml").read_text()
    return _config_from_dict(tomllib.loads(text))
