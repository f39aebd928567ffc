"""Receiver detection-complexity accounting.

The counting unit is one evaluation of a joint-hypothesis likelihood term
inside a subcarrier (function-node) update, per subcarrier and per symbol
time.  Symbol-level detection enumerates the full joint alphabet every
pass; level-wise detection only enumerates the extensions that remain open
at the current stage.  All arithmetic is exact (python ints / Fraction).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "flops_bicm",
    "flops_mlcm",
    "flops_ratio",
    "ratio_curve",
    "write_ratio_curve_csv",
    "count_fn_terms",
    "RatioPoint",
    "ComplexityReport",
]


def _check_lu(levels: int, users_per_subcarrier: int) -> None:
    if not isinstance(levels, int) or levels < 1:
        raise ValueError(f"level count must be a positive integer, got {levels!r}")
    if not isinstance(users_per_subcarrier, int) or users_per_subcarrier < 1:
        raise ValueError(
            f"users per subcarrier must be a positive integer, got {users_per_subcarrier!r}"
        )


def flops_bicm(levels: int, users_per_subcarrier: int, mpa_iterations: int) -> int:
    """Terms per subcarrier per symbol for symbol-level MPA: I * 2**(L*U)."""
    _check_lu(levels, users_per_subcarrier)
    if not isinstance(mpa_iterations, int) or mpa_iterations < 1:
        raise ValueError(f"iteration count must be a positive integer, got {mpa_iterations!r}")
    return mpa_iterations * (1 << (levels * users_per_subcarrier))


def flops_mlcm(
    levels: int,
    users_per_subcarrier: int,
    active_levels: Iterable[int] | None = None,
) -> int:
    """Terms per subcarrier per symbol summed over the decoded stages.

    Stage l enumerates ``2**((L-l)*U)`` joint extensions; suppressed stages
    cost nothing.  Defaults to all levels, which telescopes to the closed
    form ``2**U * (2**(U*L) - 1) / (2**U - 1)``.
    """
    _check_lu(levels, users_per_subcarrier)
    if active_levels is None:
        stages = range(levels)
    else:
        stages = sorted({int(l) for l in active_levels})
        if not stages:
            raise ValueError("need at least one active level")
        if stages[0] < 0 or stages[-1] >= levels:
            raise ValueError(f"active level outside range(0, {levels})")
    return sum(1 << ((levels - l) * users_per_subcarrier) for l in stages)


def flops_ratio(
    levels: int,
    users_per_subcarrier: int,
    mpa_iterations: int,
    active_levels: Iterable[int] | None = None,
) -> Fraction:
    """Exact symbol-level / level-wise term-count ratio."""
    return Fraction(
        flops_bicm(levels, users_per_subcarrier, mpa_iterations),
        flops_mlcm(levels, users_per_subcarrier, active_levels),
    )


@dataclass(frozen=True)
class RatioPoint:
    users_per_subcarrier: int
    bicm_terms: int
    mlcm_terms: int
    ratio: Fraction


@dataclass(frozen=True)
class ComplexityReport:
    """Per-stage term counts for one configuration."""

    levels: int
    users_per_subcarrier: int
    mpa_iterations: int
    active_levels: tuple[int, ...]
    stage_terms: tuple[tuple[int, int], ...]  # (stage, terms per FN per symbol)
    mlcm_total: int
    bicm_total: int
    ratio: Fraction


def build_report(
    levels: int,
    users_per_subcarrier: int,
    mpa_iterations: int = 1,
    active_levels: Iterable[int] | None = None,
) -> ComplexityReport:
    stages = (
        tuple(range(levels))
        if active_levels is None
        else tuple(sorted({int(l) for l in active_levels}))
    )
    stage_terms = tuple(
        (l, flops_mlcm(levels, users_per_subcarrier, [l])) for l in stages
    )
    return ComplexityReport(
        levels=levels,
        users_per_subcarrier=users_per_subcarrier,
        mpa_iterations=mpa_iterations,
        active_levels=stages,
        stage_terms=stage_terms,
        mlcm_total=flops_mlcm(levels, users_per_subcarrier, stages),
        bicm_total=flops_bicm(levels, users_per_subcarrier, mpa_iterations),
        ratio=flops_ratio(levels, users_per_subcarrier, mpa_iterations, stages),
    )


def ratio_curve(
    levels: int,
    mpa_iterations: int,
    overload_range: Sequence[int],
    active_levels: Iterable[int] | None = None,
) -> list[RatioPoint]:
    """Ratio as a function of users per subcarrier (exact rationals)."""
    active = None if active_levels is None else tuple(active_levels)
    out = []
    for u in overload_range:
        u = int(u)
        out.append(
            RatioPoint(
                users_per_subcarrier=u,
                bicm_terms=flops_bicm(levels, u, mpa_iterations),
                mlcm_terms=flops_mlcm(levels, u, active),
                ratio=flops_ratio(levels, u, mpa_iterations, active),
            )
        )
    return out


def write_ratio_curve_csv(path, levels, mpa_iterations, overload_range, active_levels=None) -> None:
    points = ratio_curve(levels, mpa_iterations, overload_range, active_levels)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("users_per_subcarrier,bicm_terms,mlcm_terms,ratio_num,ratio_den,ratio\n")
        for p in points:
            fh.write(
                f"{p.users_per_subcarrier},{p.bicm_terms},{p.mlcm_terms},"
                f"{p.ratio.numerator},{p.ratio.denominator},{float(p.ratio)!r}\n"
            )


def count_fn_terms(counter, stage: int) -> int:
    """Per-call term count recorded by an instrumented detector run.

    Raises if the recorded function-node updates of that stage disagree,
    which would mean the detector enumerated inconsistently.
    """
    values = counter.per_call_terms(stage)
    if not values:
        raise ValueError(f"no recorded function-node updates for stage {stage}")
    if len(values) != 1:
        raise ValueError(
            f"inconsistent term counts for stage {stage}: {sorted(values)}"
        )
    return next(iter(values))
