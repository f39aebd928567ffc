"""Sparse non-orthogonal uplink: factor graph, channel, detection, receiver.

Each user spreads one unit-energy symbol stream over its ``d_vn`` allocated
subcarriers (repetition); a subcarrier sees the faded superposition of the
users allocated to it plus complex AWGN.  Detection runs per level: a
function-node update enumerates, for every user on the subcarrier, the
subconstellation extensions that are still open given that user's known
lower-level bits, and marginalizes the current level bit.  Variable nodes
combine the per-subcarrier messages by log-domain addition.

Messages stay in the log domain; the exponent convention, max-log
approximation, iteration count, and output LLR clip all sit in
:class:`MpaOptions`.  Message scaling is irrelevant: every consumer only
looks at log-ratio differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.special import logsumexp

from .mapping import LevelMapper
from .polar import PolarCodeSpec, encode, scl_decode

__all__ = [
    "ScmaGraph",
    "ChannelRealization",
    "MpaOptions",
    "TermCounter",
    "MsdResult",
    "sample_channel",
    "transmit",
    "fn_update_mlcm",
    "fn_update_bicm",
    "mpa_detect_stage",
    "mpa_detect_symbols",
    "msd_receive",
]

RECEIVE_MODES = ("standard", "genie", "crc_iterated")


# ---------------------------------------------------------------------------
# graph


@dataclass(frozen=True)
class ScmaGraph:
    """Binary allocation matrix, rows = subcarriers, columns = users."""

    allocation: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(int(v) for v in row) for row in self.allocation)
        object.__setattr__(self, "allocation", rows)
        if not rows or not rows[0]:
            raise ValueError("allocation matrix must be nonempty")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("allocation rows must all have the same length")
        if any(v not in (0, 1) for r in rows for v in r):
            raise ValueError("allocation entries must be 0 or 1")
        if any(sum(r) == 0 for r in rows):
            raise ValueError("every subcarrier needs at least one user")
        if any(sum(r[u] for r in rows) == 0 for u in range(width)):
            raise ValueError("every user needs at least one subcarrier")

    @property
    def num_subcarriers(self) -> int:
        return len(self.allocation)

    @property
    def num_users(self) -> int:
        return len(self.allocation[0])

    def users_of(self, subcarrier: int) -> tuple[int, ...]:
        return _users_of(self, subcarrier)

    def subcarriers_of(self, user: int) -> tuple[int, ...]:
        return _subcarriers_of(self, user)

    @property
    def max_users_per_subcarrier(self) -> int:
        return max(sum(r) for r in self.allocation)

    def mask(self) -> np.ndarray:
        return np.array(self.allocation, dtype=np.uint8)

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"allocation": [list(r) for r in self.allocation]}, fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "ScmaGraph":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls(tuple(tuple(row) for row in doc["allocation"]))

    @classmethod
    def default(cls) -> "ScmaGraph":
        """Bundled 4x6 instance: 3 users per subcarrier, 2 subcarriers per user."""
        text = (
            resources.files("polarnoma").joinpath("data/default_graph.json").read_text()
        )
        return cls(tuple(tuple(row) for row in json.loads(text)["allocation"]))


@lru_cache(maxsize=None)
def _users_of(graph: ScmaGraph, subcarrier: int) -> tuple[int, ...]:
    return tuple(u for u, v in enumerate(graph.allocation[subcarrier]) if v)


@lru_cache(maxsize=None)
def _subcarriers_of(graph: ScmaGraph, user: int) -> tuple[int, ...]:
    return tuple(f for f, row in enumerate(graph.allocation) if row[user])


# ---------------------------------------------------------------------------
# channel


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One block-fading draw: per-edge gains, zero off the graph support."""

    gains: np.ndarray
    noise_variance: float

    def __post_init__(self) -> None:
        if self.noise_variance <= 0:
            raise ValueError("noise variance must be positive")
        if self.gains.ndim != 2:
            raise ValueError("gains must be a (subcarriers, users) matrix")


def sample_channel(graph: ScmaGraph, noise_variance: float, rng) -> ChannelRealization:
    """i.i.d. unit-variance complex Gaussian gain on every allocated edge."""
    shape = (graph.num_subcarriers, graph.num_users)
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return ChannelRealization(gains=h * graph.mask(), noise_variance=float(noise_variance))


def transmit(
    graph: ScmaGraph, symbols: np.ndarray, channel: ChannelRealization, rng
) -> np.ndarray:
    """Received (subcarriers, frame) block: faded superposition plus noise.

    ``symbols`` is (users, frame); each user's stream is repeated on every
    subcarrier it occupies, which the masked gain matrix encodes already.
    """
    x = np.asarray(symbols)
    if x.ndim != 2 or x.shape[0] != graph.num_users:
        raise ValueError(f"symbols must be ({graph.num_users}, frame), got {x.shape}")
    if channel.gains.shape != (graph.num_subcarriers, graph.num_users):
        raise ValueError("channel does not match the graph")
    noise = (
        rng.standard_normal((graph.num_subcarriers, x.shape[1]))
        + 1j * rng.standard_normal((graph.num_subcarriers, x.shape[1]))
    ) * np.sqrt(channel.noise_variance / 2.0)
    return channel.gains @ x + noise


# ---------------------------------------------------------------------------
# detection


@dataclass(frozen=True)
class MpaOptions:
    """Detector knobs.

    ``double_exponent`` switches the likelihood exponent from
    exp(-|.|^2/sigma2) to exp(-|.|^2/(2 sigma2)); messages are scale
    invariant so this only matters as an effective-temperature choice.
    ``llr_clip=None`` disables output clipping (exactness tests).
    ``max_inner_iterations`` bounds the per-stage detect/decode loop of the
    CRC-iterated receiver.
    """

    iterations: int = 1
    use_max_log: bool = False
    double_exponent: bool = False
    llr_clip: float | None = 40.0
    max_inner_iterations: int = 4

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("need at least one message-passing iteration")
        if self.llr_clip is not None and not self.llr_clip > 0:
            raise ValueError("LLR clip must be positive or None")
        if self.max_inner_iterations < 1:
            raise ValueError("need at least one inner iteration")


class TermCounter:
    """Records likelihood-term evaluations of instrumented detector runs.

    One record per function-node update call: (stage, subcarrier, terms per
    symbol, symbols).  Symbol-level (non-staged) updates log stage ``None``.
    """

    def __init__(self) -> None:
        self.records: list[tuple[int | None, int, int, int]] = []

    def record(self, stage, subcarrier: int, terms_per_symbol: int, symbols: int) -> None:
        self.records.append((stage, int(subcarrier), int(terms_per_symbol), int(symbols)))

    def stages(self) -> list:
        seen = []
        for stage, *_ in self.records:
            if stage not in seen:
                seen.append(stage)
        return seen

    def per_call_terms(self, stage) -> set[int]:
        return {t for s, _, t, _ in self.records if s == stage}

    def fn_symbol_totals(self, stage) -> dict[int, int]:
        """Per-subcarrier terms per symbol summed over calls of one stage."""
        out: dict[int, int] = {}
        for s, f, t, _ in self.records:
            if s == stage:
                out[f] = out.get(f, 0) + t
        return out

    def total_terms(self) -> int:
        return sum(t * n for _, _, t, n in self.records)


def _prefix_ints(prefix_rows: np.ndarray, frame: int) -> np.ndarray:
    if prefix_rows.size == 0:
        return np.zeros(frame, np.int64)
    weights = (1 << np.arange(prefix_rows.shape[0], dtype=np.int64))[:, None]
    return (prefix_rows.astype(np.int64) * weights).sum(axis=0)


def _fn_log_messages(
    y_row: np.ndarray,
    gains: np.ndarray,
    prefix_ints: np.ndarray,
    prefix_lens: np.ndarray,
    mapper: LevelMapper,
    noise_variance: float,
    options: MpaOptions,
    log_priors=None,
):
    """Binary log messages of one subcarrier for each of its users.

    Enumerates the joint extension grid once; each user's pair is the
    (logsumexp or max) marginal of its current-level bit, weighted by the
    other users' priors (extrinsic).  Users whose prefix already fixes the
    whole label get a neutral 0 message.  Returns ((users, 2, frame) array,
    terms per symbol).
    """
    n_on = gains.shape[0]
    frame = y_row.shape[0]
    levels = mapper.levels
    scale = noise_variance * (2.0 if options.double_exponent else 1.0)
    ext_counts = [1 << (levels - int(prefix_lens[u])) for u in range(n_on)]

    def _ax(u, arr_len):
        return (1,) * u + (arr_len,) + (1,) * (n_on - 1 - u) + (-1,)

    res = y_row.reshape((1,) * n_on + (frame,)).astype(np.complex128)
    for u in range(n_on):
        ext = np.arange(ext_counts[u], dtype=np.int64)
        cand = mapper.points[prefix_ints[u][None, :] + (ext[:, None] << int(prefix_lens[u]))]
        res = res - gains[u] * cand.reshape(_ax(u, ext_counts[u]))
    loglik = -(res.real**2 + res.imag**2) / scale

    out = np.zeros((n_on, 2, frame))
    for u in range(n_on):
        if ext_counts[u] == 1:
            continue  # fully conditioned user; message row unused
        tot = loglik
        if log_priors is not None:
            for v in range(n_on):
                if v == u or log_priors[v] is None:
                    continue
                parity = np.arange(ext_counts[v]) & 1
                tot = tot + log_priors[v][parity].reshape(_ax(v, ext_counts[v]))
        axes = tuple(a for a in range(n_on) if a != u)
        if axes:
            red = (
                np.max(tot, axis=axes)
                if options.use_max_log
                else logsumexp(tot, axis=axes)
            )
        else:
            red = tot
        for b in (0, 1):
            part = red[b::2]
            out[u, b] = (
                np.max(part, axis=0) if options.use_max_log else logsumexp(part, axis=0)
            )
    terms = 1
    for e in ext_counts:
        terms *= e
    return out, terms


def _normalize_log_pair(pair: np.ndarray) -> np.ndarray:
    return pair - np.max(pair, axis=0, keepdims=True)


def fn_update_mlcm(
    y_f: complex,
    gains,
    stage: int,
    prefixes,
    mapper: LevelMapper,
    noise_variance: float,
    options: MpaOptions = MpaOptions(),
    priors=None,
) -> np.ndarray:
    """Single-symbol function-node update at one level.

    ``prefixes`` holds each on-subcarrier user's known lower bits (length
    >= ``stage``; longer prefixes mean extra conditioning).  Returns a
    (users, 2) array of unnormalized probabilities for the stage bit; the
    overall scale is arbitrary.  ``priors`` may give per-user bit priors.
    """
    gains = np.asarray(gains, dtype=np.complex128).ravel()
    n_on = gains.size
    if len(prefixes) != n_on:
        raise ValueError("one prefix per user on the subcarrier required")
    pre = [np.asarray(p, dtype=np.uint8).ravel() for p in prefixes]
    if any(p.size < stage or p.size > mapper.levels for p in pre):
        raise ValueError(f"prefix lengths must lie in [{stage}, {mapper.levels}]")
    ints = np.stack([_prefix_ints(p[:, None], 1) for p in pre])
    lens = np.array([p.size for p in pre], np.int64)
    log_priors = None
    if priors is not None:
        arr = np.asarray(priors, dtype=float)
        if arr.shape != (n_on, 2) or np.any(arr < 0):
            raise ValueError("priors must be a nonnegative (users, 2) array")
        with np.errstate(divide="ignore"):
            log_priors = [np.log(arr[u])[:, None] for u in range(n_on)]
    msgs, _ = _fn_log_messages(
        np.asarray([y_f], dtype=np.complex128),
        gains,
        ints,
        lens,
        mapper,
        noise_variance,
        options,
        log_priors,
    )
    return np.exp(_normalize_log_pair(msgs[..., 0].T).T)


def fn_update_bicm(
    y_f: complex,
    gains,
    priors,
    mapper: LevelMapper,
    noise_variance: float,
    options: MpaOptions = MpaOptions(),
) -> np.ndarray:
    """Symbol-level function-node update (full joint alphabet).

    ``priors``: (users, 2**levels) nonnegative weights.  Returns extrinsic
    per-user, per-symbol unnormalized probabilities of the same shape.
    """
    gains = np.asarray(gains, dtype=np.complex128).ravel()
    q = mapper.points.size
    arr = np.asarray(priors, dtype=float)
    if arr.shape != (gains.size, q) or np.any(arr < 0):
        raise ValueError(f"priors must be a nonnegative ({gains.size}, {q}) array")
    with np.errstate(divide="ignore"):
        lp = np.log(arr)[..., None]
    msgs, _ = _fn_symbol_log_messages(
        np.asarray([y_f], dtype=np.complex128),
        gains,
        mapper,
        noise_variance,
        options,
        [lp[u] for u in range(gains.size)],
    )
    flat = msgs[..., 0]
    return np.exp(flat - flat.max(axis=1, keepdims=True))


def _fn_symbol_log_messages(
    y_row, gains, mapper, noise_variance, options, log_priors=None
):
    n_on = gains.shape[0]
    frame = y_row.shape[0]
    q = mapper.points.size
    scale = noise_variance * (2.0 if options.double_exponent else 1.0)

    def _ax(u, arr_len):
        return (1,) * u + (arr_len,) + (1,) * (n_on - 1 - u) + (-1,)

    res = y_row.reshape((1,) * n_on + (frame,)).astype(np.complex128)
    for u in range(n_on):
        res = res - gains[u] * mapper.points.reshape(_ax(u, q))
    loglik = -(res.real**2 + res.imag**2) / scale

    out = np.empty((n_on, q, frame))
    for u in range(n_on):
        tot = loglik
        if log_priors is not None:
            for v in range(n_on):
                if v == u or log_priors[v] is None:
                    continue
                tot = tot + log_priors[v].reshape(_ax(v, q))
        axes = tuple(a for a in range(n_on) if a != u)
        if axes:
            out[u] = (
                np.max(tot, axis=axes)
                if options.use_max_log
                else logsumexp(tot, axis=axes)
            )
        else:
            out[u] = tot
    return out, q**n_on


def _check_received(y, channel, graph):
    arr = np.asarray(y, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != graph.num_subcarriers:
        raise ValueError(
            f"received block must be ({graph.num_subcarriers}, frame), got {arr.shape}"
        )
    if channel.gains.shape != (graph.num_subcarriers, graph.num_users):
        raise ValueError("channel does not match the graph")
    return arr


def mpa_detect_stage(
    y,
    channel: ChannelRealization,
    graph: ScmaGraph,
    stage: int,
    prefix_bits,
    mapper: LevelMapper,
    options: MpaOptions = MpaOptions(),
    counter: TermCounter | None = None,
    only_user: int | None = None,
) -> np.ndarray:
    """Per-user LLRs of the stage bit over a whole frame.

    ``prefix_bits[u]`` is a (len_u, frame) array of user u's known bits,
    ``len_u >= stage``; users with longer prefixes are conditioned further
    (their extension set shrinks) and their output row is meaningless.
    ``only_user`` restricts the update to that user's subcarriers.
    """
    arr = _check_received(y, channel, graph)
    frame = arr.shape[1]
    n_users = graph.num_users
    if not 0 <= stage < mapper.levels:
        raise ValueError(f"stage {stage} outside range(0, {mapper.levels})")
    pre = [np.asarray(p, dtype=np.uint8).reshape(-1, frame) for p in prefix_bits]
    if len(pre) != n_users:
        raise ValueError("one prefix array per user required")
    lens = np.array([p.shape[0] for p in pre], np.int64)
    if np.any(lens < stage) or np.any(lens > mapper.levels):
        raise ValueError(f"prefix lengths must lie in [{stage}, {mapper.levels}]")
    ints = [_prefix_ints(p, frame) for p in pre]

    subcarriers = (
        graph.subcarriers_of(only_user) if only_user is not None else range(graph.num_subcarriers)
    )
    fv: dict[tuple[int, int], np.ndarray] = {}
    vf: dict[tuple[int, int], np.ndarray | None] = {}
    for it in range(options.iterations):
        for f in subcarriers:
            users = graph.users_of(f)
            gains = channel.gains[f, list(users)]
            log_priors = None
            if it > 0:
                log_priors = [vf.get((f, u)) for u in users]
            msgs, terms = _fn_log_messages(
                arr[f],
                gains,
                np.stack([ints[u] for u in users]),
                lens[list(users)],
                mapper,
                noise_variance=channel.noise_variance,
                options=options,
                log_priors=log_priors,
            )
            if counter is not None:
                counter.record(stage, f, terms, frame)
            for k, u in enumerate(users):
                fv[(f, u)] = msgs[k]
        if it < options.iterations - 1:
            for f in subcarriers:
                for u in graph.users_of(f):
                    total = np.zeros((2, frame))
                    for g in graph.subcarriers_of(u):
                        if g != f and (g, u) in fv:
                            total = total + fv[(g, u)]
                    vf[(f, u)] = _normalize_log_pair(total)

    llr = np.zeros((n_users, frame))
    for u in range(n_users):
        for f in graph.subcarriers_of(u):
            if (f, u) in fv:
                llr[u] += fv[(f, u)][0] - fv[(f, u)][1]
    if options.llr_clip is not None:
        np.clip(llr, -options.llr_clip, options.llr_clip, out=llr)
    return llr


def mpa_detect_symbols(
    y,
    channel: ChannelRealization,
    graph: ScmaGraph,
    mapper: LevelMapper,
    options: MpaOptions = MpaOptions(),
    counter: TermCounter | None = None,
) -> np.ndarray:
    """Symbol-level MPA reference: per-user log posteriors over the alphabet.

    Runs ``options.iterations`` full passes over every subcarrier (this is
    the expensive flat detector the staged receiver avoids).  Returns a
    (users, 2**levels, frame) array of normalized log posteriors.
    """
    arr = _check_received(y, channel, graph)
    frame = arr.shape[1]
    q = mapper.points.size
    fv: dict[tuple[int, int], np.ndarray] = {}
    vf: dict[tuple[int, int], np.ndarray | None] = {}
    for it in range(options.iterations):
        for f in range(graph.num_subcarriers):
            users = graph.users_of(f)
            gains = channel.gains[f, list(users)]
            log_priors = None
            if it > 0:
                log_priors = [vf.get((f, u)) for u in users]
            msgs, terms = _fn_symbol_log_messages(
                arr[f], gains, mapper, channel.noise_variance, options, log_priors
            )
            if counter is not None:
                counter.record(None, f, terms, frame)
            for k, u in enumerate(users):
                fv[(f, u)] = msgs[k]
        if it < options.iterations - 1:
            for f in range(graph.num_subcarriers):
                for u in graph.users_of(f):
                    total = np.zeros((q, frame))
                    for g in graph.subcarriers_of(u):
                        if g != f and (g, u) in fv:
                            total = total + fv[(g, u)]
                    vf[(f, u)] = total - total.max(axis=0, keepdims=True)

    post = np.zeros((graph.num_users, q, frame))
    for u in range(graph.num_users):
        for f in graph.subcarriers_of(u):
            if (f, u) in fv:
                post[u] += fv[(f, u)]
    post -= logsumexp(post, axis=1, keepdims=True)
    return post


# ---------------------------------------------------------------------------
# multi-stage receiver


@dataclass
class MsdResult:
    """Decoded payloads, CRC verdicts, and decision-feedback codewords."""

    data_bits: list[list[np.ndarray | None]]
    crc_ok: np.ndarray
    level_codewords: np.ndarray  # (users, levels, frame) re-encoded decisions


def msd_receive(
    y,
    channel: ChannelRealization,
    graph: ScmaGraph,
    level_specs,
    mapper: LevelMapper,
    mode: str = "standard",
    options: MpaOptions = MpaOptions(),
    true_level_bits=None,
    counter: TermCounter | None = None,
) -> MsdResult:
    """Multi-stage detection and decoding for every user.

    ``level_specs[l]`` is the level-l :class:`PolarCodeSpec` or ``None`` for
    a suppressed level (known all-zero codeword, nothing decoded).  Modes:

    * ``standard``: decision feedback; decoded codewords condition later
      stages.
    * ``genie``: when detecting a user, the interfering users' stage
      prefixes are the true transmitted bits (no cross-user error
      propagation); the user's own feedback is still its own decisions.
      Requires ``true_level_bits`` (users, levels, frame).
    * ``crc_iterated``: per stage, detection and decoding repeat (at most
      ``options.max_inner_iterations`` times) while CRC failures remain and
      the previous round fixed at least one user; users that pass get their
      level codeword conditioned into the next round.
    """
    arr = _check_received(y, channel, graph)
    frame = arr.shape[1]
    n_users = graph.num_users
    levels = mapper.levels
    if mode not in RECEIVE_MODES:
        raise ValueError(f"mode must be one of {RECEIVE_MODES}, got {mode!r}")
    if len(level_specs) != levels:
        raise ValueError(f"need {levels} level specs (None for suppressed)")
    for spec in level_specs:
        if spec is not None and spec.block_length != frame:
            raise ValueError("level spec block length must equal the frame length")
    truth = None
    if mode == "genie":
        if true_level_bits is None:
            raise ValueError("genie mode needs the true per-level bits")
        truth = np.asarray(true_level_bits, dtype=np.uint8)
        if truth.shape != (n_users, levels, frame):
            raise ValueError(
                f"true bits must be ({n_users}, {levels}, {frame}), got {truth.shape}"
            )

    prefixes = [np.zeros((0, frame), np.uint8) for _ in range(n_users)]
    data_bits: list[list[np.ndarray | None]] = [[None] * levels for _ in range(n_users)]
    crc_ok = np.ones((n_users, levels), bool)
    codewords = np.zeros((n_users, levels, frame), np.uint8)

    for l in range(levels):
        spec = level_specs[l]
        if spec is None:
            for u in range(n_users):
                prefixes[u] = np.vstack([prefixes[u], np.zeros((1, frame), np.uint8)])
            continue

        level_cw = np.zeros((n_users, frame), np.uint8)
        if mode == "genie":
            for u in range(n_users):
                ctx = [
                    prefixes[v] if v == u else truth[v, :l]
                    for v in range(n_users)
                ]
                llr = mpa_detect_stage(
                    arr, channel, graph, l, ctx, mapper,
                    options=options, counter=counter, only_user=u,
                )
                bits, ok = scl_decode(llr[u], spec)
                data_bits[u][l] = bits
                crc_ok[u, l] = ok
                level_cw[u] = encode(bits, spec)
        elif mode == "crc_iterated":
            pending = list(range(n_users))
            inner_prefixes = [p for p in prefixes]
            for _ in range(options.max_inner_iterations):
                llr = mpa_detect_stage(
                    arr, channel, graph, l, inner_prefixes, mapper,
                    options=options, counter=counter,
                )
                newly_passed = []
                for u in pending:
                    bits, ok = scl_decode(llr[u], spec)
                    data_bits[u][l] = bits
                    crc_ok[u, l] = ok
                    level_cw[u] = encode(bits, spec)
                    if ok:
                        newly_passed.append(u)
                for u in newly_passed:
                    pending.remove(u)
                    inner_prefixes[u] = np.vstack([inner_prefixes[u], level_cw[u][None]])
                if not pending or not newly_passed:
                    break
        else:
            llr = mpa_detect_stage(
                arr, channel, graph, l, prefixes, mapper,
                options=options, counter=counter,
            )
            for u in range(n_users):
                bits, ok = scl_decode(llr[u], spec)
                data_bits[u][l] = bits
                crc_ok[u, l] = ok
                level_cw[u] = encode(bits, spec)

        codewords[:, l, :] = level_cw
        for u in range(n_users):
            prefixes[u] = np.vstack([prefixes[u], level_cw[u][None]])

    return MsdResult(data_bits=data_bits, crc_ok=crc_ok, level_codewords=codewords)
