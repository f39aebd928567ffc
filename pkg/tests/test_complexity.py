import csv
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarnoma.complexity import (
    ComplexityReport,
    build_report,
    count_fn_terms,
    flops_bicm,
    flops_mlcm,
    flops_ratio,
    ratio_curve,
    write_ratio_curve_csv,
)


def test_reference_point_values():
    assert flops_mlcm(4, 3, [1, 2, 3]) == 584
    assert flops_mlcm(4, 3) == 4680
    assert flops_bicm(4, 3, 1) == 4096
    assert flops_bicm(4, 3, 2) == 8192


def test_staged_terms_breakdown():
    # 2**((4-l)*3) for l = 1, 2, 3
    assert flops_mlcm(4, 3, [1]) == 512
    assert flops_mlcm(4, 3, [2]) == 64
    assert flops_mlcm(4, 3, [3]) == 8
    assert 512 + 64 + 8 == 584


@given(st.integers(1, 5), st.integers(1, 5))
def test_all_level_total_telescopes(levels, users):
    base = 1 << users
    closed = base * (base**levels - 1) // (base - 1)
    assert flops_mlcm(levels, users) == closed


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 4))
def test_ratio_is_exact_fraction(levels, users, iters):
    r = flops_ratio(levels, users, iters)
    assert isinstance(r, Fraction)
    assert r == Fraction(flops_bicm(levels, users, iters), flops_mlcm(levels, users))


def test_ratio_known_value():
    # L=2, U=3, I=4: 4*64 / (64 + 8) = 32/9
    assert flops_ratio(2, 3, 4) == Fraction(32, 9)


def test_suppressing_a_stage_only_removes_its_terms():
    full = flops_mlcm(4, 3)
    assert flops_mlcm(4, 3, [1, 2, 3]) == full - flops_mlcm(4, 3, [0])


@pytest.mark.parametrize(
    "call",
    [
        lambda: flops_bicm(0, 3, 1),
        lambda: flops_bicm(4, 0, 1),
        lambda: flops_bicm(4, 3, 0),
        lambda: flops_bicm(4.0, 3, 1),
        lambda: flops_mlcm(4, 3, []),
        lambda: flops_mlcm(4, 3, [4]),
        lambda: flops_mlcm(4, 3, [-1]),
    ],
)
def test_validation(call):
    with pytest.raises(ValueError):
        call()


def test_build_report():
    rep = build_report(4, 3, mpa_iterations=2, active_levels=[1, 2, 3])
    assert isinstance(rep, ComplexityReport)
    assert rep.stage_terms == ((1, 512), (2, 64), (3, 8))
    assert rep.mlcm_total == 584
    assert rep.bicm_total == 8192
    assert rep.ratio == Fraction(8192, 584)


def test_ratio_curve_monotone_in_overload():
    points = ratio_curve(4, 1, range(1, 7))
    assert [p.users_per_subcarrier for p in points] == [1, 2, 3, 4, 5, 6]
    ratios = [p.ratio for p in points]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_ratio_curve_csv_roundtrip(tmp_path):
    path = tmp_path / "curve.csv"
    write_ratio_curve_csv(path, 2, 4, range(1, 7))
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    row3 = next(r for r in rows if r["users_per_subcarrier"] == "3")
    assert int(row3["bicm_terms"]) == 256
    assert int(row3["mlcm_terms"]) == 72
    assert (int(row3["ratio_num"]), int(row3["ratio_den"])) == (32, 9)
    assert float(row3["ratio"]) == pytest.approx(32 / 9)


def test_count_fn_terms_consistency_checks():
    class Stub:
        def __init__(self, values):
            self._values = values

        def per_call_terms(self, stage):
            return self._values

    assert count_fn_terms(Stub({64}), 2) == 64
    with pytest.raises(ValueError):
        count_fn_terms(Stub(set()), 2)
    with pytest.raises(ValueError):
        count_fn_terms(Stub({64, 512}), 2)
