import json

import numpy as np
import pytest

from polarnoma.capacity import validate_profile
from polarnoma.polar import DesignChannelParam, design_frozen_set, save_frozen_set
from polarnoma.scma import ScmaGraph
from polarnoma.simulate import (
    FER_CSV_HEADER,
    SimConfig,
    build_level_specs,
    clopper_pearson,
    default_scenario,
    load_sim_config,
    run_fer,
    run_frame,
)


def _tiny_cfg(**over):
    base = dict(
        graph=ScmaGraph.default(),
        block_length=16,
        info_counts=(0, 12),
        snr_grid_db=(0.0, 3.0),
        design_snr_db=4.0,
        design_samples=2000,
        min_frame_errors=8,
        max_frames=64,
        frames_per_batch=16,
        master_seed=99,
    )
    base.update(over)
    return SimConfig(**base)


# --- config -------------------------------------------------------------------


def test_config_properties():
    cfg = _tiny_cfg()
    assert cfg.levels == 2
    assert cfg.mapper().levels == 2
    assert cfg.profile().active_levels == (False, True)
    assert cfg.crc_spec().degree == 8
    assert cfg.mpa_options().iterations == 1


@pytest.mark.parametrize(
    "over",
    [
        dict(mode="turbo"),
        dict(snr_grid_db=()),
        dict(snr_grid_db=(3.0, 1.0)),
        dict(snr_grid_db=(3.0, 3.0)),
        dict(info_counts=(0, 0)),
        dict(info_counts=(0, 9)),  # 9 payload bits cannot hold an 8-bit CRC
        dict(info_counts=(0, -4)),
        dict(info_counts=(0, 20)),
        dict(info_counts=(0, 12, 14)),  # odd level count
        dict(min_frame_errors=0),
        dict(frames_per_batch=0),
        dict(fixed_channel_frames=(10,)),
        dict(fixed_channel_frames=(10, 0)),
        dict(frozen_set_paths=("a.json",)),
    ],
)
def test_config_validation(over):
    with pytest.raises(ValueError):
        _tiny_cfg(**over)


# --- code construction -----------------------------------------------------------


def test_build_level_specs_shapes_and_cache():
    cfg = _tiny_cfg()
    specs = build_level_specs(cfg)
    assert specs[0] is None
    assert specs[1].block_length == 16 and specs[1].info_count == 12
    assert specs[1].crc.degree == 8 and specs[1].data_count == 4
    assert build_level_specs(cfg) is specs  # cached
    assert build_level_specs(_tiny_cfg(design_snr_db=6.0)) is not specs


def test_build_level_specs_from_sidecars(tmp_path):
    frozen = design_frozen_set(16, 12, DesignChannelParam("bec", 0.4))
    path = tmp_path / "level1.json"
    save_frozen_set(path, 16, 12, frozen)
    cfg = _tiny_cfg(frozen_set_paths=(None, str(path)))
    specs = build_level_specs(cfg)
    assert specs[1].frozen_indices == frozen

    wrong = tmp_path / "wrong.json"
    save_frozen_set(wrong, 32, 12, design_frozen_set(32, 12, DesignChannelParam("bec", 0.4)))
    with pytest.raises(ValueError):
        build_level_specs(_tiny_cfg(frozen_set_paths=(None, str(wrong))))
    with pytest.raises(ValueError):
        build_level_specs(_tiny_cfg(frozen_set_paths=(None, None)))


# --- single frames ----------------------------------------------------------------


def test_run_frame_deterministic():
    cfg = _tiny_cfg()
    a = run_frame(cfg, 0, 5)
    b = run_frame(cfg, 0, 5)
    assert a == b
    assert len(a.user_errors) == 6
    for err, lvl in zip(a.user_errors, a.first_error_level):
        assert err == (lvl >= 0)


def test_run_frame_varies_with_index():
    cfg = _tiny_cfg()
    outcomes = {run_frame(cfg, 0, i) for i in range(12)}
    assert len(outcomes) > 1


def test_run_frame_validation():
    cfg = _tiny_cfg()
    with pytest.raises(ValueError):
        run_frame(cfg, 2, 0)
    with pytest.raises(ValueError):
        run_frame(cfg, 0, -1)


# --- sweeps -------------------------------------------------------------------------


def test_stopping_rules():
    # 0 dB: errors plentiful, stops at the first batch boundary
    cfg = _tiny_cfg(snr_grid_db=(0.0,), min_frame_errors=8, max_frames=64)
    point = run_fer(cfg).points[0]
    assert point.channel_frames == 16
    assert point.frame_errors >= 8
    assert point.frames == 16 * 6

    # clean channel: runs into the frame cap with (nearly) no errors
    cfg = _tiny_cfg(snr_grid_db=(40.0,), max_frames=32)
    point = run_fer(cfg).points[0]
    assert point.channel_frames == 32
    assert point.fer < 0.05


def test_fixed_channel_frames_override():
    cfg = _tiny_cfg(snr_grid_db=(0.0, 40.0), fixed_channel_frames=(24, 8))
    result = run_fer(cfg)
    assert [p.channel_frames for p in result.points] == [24, 8]


def test_extremes_bracket_the_waterfall():
    hopeless = run_fer(_tiny_cfg(snr_grid_db=(-10.0,), max_frames=16)).points[0]
    assert hopeless.fer > 0.5
    clean = run_fer(_tiny_cfg(snr_grid_db=(40.0,), max_frames=16)).points[0]
    assert clean.fer == 0.0


def test_keep_outcomes_and_histogram():
    cfg = _tiny_cfg(snr_grid_db=(0.0,), fixed_channel_frames=(16,))
    point = run_fer(cfg, keep_outcomes=True).points[0]
    assert len(point.per_frame_errors) == 16
    assert sum(point.per_frame_errors) == point.frame_errors
    assert sum(point.first_error_histogram) == point.frame_errors
    assert point.first_error_histogram[0] == 0  # level 0 is suppressed


def test_on_point_callback_order():
    seen = []
    run_fer(_tiny_cfg(fixed_channel_frames=(8, 8)), on_point=lambda p: seen.append(p.snr_db))
    assert seen == [0.0, 3.0]


def test_ci_brackets_fer():
    point = run_fer(_tiny_cfg(snr_grid_db=(2.0,), fixed_channel_frames=(32,))).points[0]
    assert point.ci_low <= point.fer <= point.ci_high


def test_parallel_run_is_byte_identical():
    cfg = _tiny_cfg(fixed_channel_frames=(24, 24))
    serial = run_fer(cfg, workers=1)
    parallel = run_fer(cfg, workers=2)
    assert serial.csv_text() == parallel.csv_text()
    assert serial.points == parallel.points


def test_genie_mode_pairs_with_standard():
    std = run_fer(_tiny_cfg(snr_grid_db=(3.0,), fixed_channel_frames=(24,)), keep_outcomes=True)
    gen = run_fer(
        _tiny_cfg(snr_grid_db=(3.0,), fixed_channel_frames=(24,), mode="genie"),
        keep_outcomes=True,
    )
    assert gen.points[0].frame_errors <= std.points[0].frame_errors
    # paired seeding: frame i sees the same channel in both runs
    assert len(std.points[0].per_frame_errors) == len(gen.points[0].per_frame_errors)


def test_run_fer_validation():
    with pytest.raises(ValueError):
        run_fer(_tiny_cfg(), workers=0)


# --- confidence intervals -------------------------------------------------------------


def test_clopper_pearson_edges():
    low, high = clopper_pearson(0, 50)
    assert low == 0.0 and 0.0 < high < 0.1
    low, high = clopper_pearson(50, 50)
    assert 0.9 < low < 1.0 and high == 1.0


def test_clopper_pearson_known_value():
    low, high = clopper_pearson(5, 100)
    assert low == pytest.approx(0.0164, abs=2e-4)
    assert high == pytest.approx(0.1128, abs=2e-4)


def test_clopper_pearson_validation():
    with pytest.raises(ValueError):
        clopper_pearson(5, 0)
    with pytest.raises(ValueError):
        clopper_pearson(6, 5)


# --- CSV --------------------------------------------------------------------------------


def test_csv_schema(tmp_path):
    result = run_fer(_tiny_cfg(fixed_channel_frames=(8, 8)))
    text = result.csv_text()
    lines = text.strip().split("\n")
    assert lines[0] == FER_CSV_HEADER
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "48"
    assert first[6:] == ["standard", "8", "1"]
    path = tmp_path / "out.csv"
    result.write_csv(path)
    assert path.read_text(encoding="utf-8") == text


# --- config files -------------------------------------------------------------------------


def test_load_toml_config(tmp_path):
    text = """
allocation = [[1, 1], [1, 1]]

[code]
block_length = 16
info_counts = [0, 12]
design_snr_db = 4.0
design_samples = 2000

[detector]
mode = "genie"
llr_clip = -1.0

[sweep]
snr_grid_db = [1.0, 2.0]
master_seed = 5
"""
    path = tmp_path / "scenario.toml"
    path.write_text(text, encoding="utf-8")
    cfg = load_sim_config(path)
    assert cfg.graph == ScmaGraph(((1, 1), (1, 1)))
    assert cfg.mode == "genie"
    assert cfg.llr_clip is None  # nonpositive disables clipping
    assert cfg.master_seed == 5
    assert cfg.info_counts == (0, 12)


def test_load_json_config(tmp_path):
    doc = {
        "code": {"block_length": 16, "info_counts": [0, 12], "design_snr_db": 4.0},
        "sweep": {"snr_grid_db": [2.0]},
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    cfg = load_sim_config(path)
    assert cfg.graph == ScmaGraph.default()
    assert cfg.block_length == 16


def test_load_config_rejects_unknowns(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[code]\nblock_size = 16\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_sim_config(bad)
    bad2 = tmp_path / "bad2.toml"
    bad2.write_text("[codec]\nblock_length = 16\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_sim_config(bad2)
    with pytest.raises(ValueError):
        load_sim_config(tmp_path / "scenario.yaml")


def test_default_scenario_loads():
    cfg = default_scenario()
    assert cfg.block_length == 256
    assert cfg.info_counts == (0, 70, 185, 248)
    assert cfg.graph == ScmaGraph.default()
    assert len(cfg.snr_grid_db) == 6
    assert cfg.mode == "standard" and cfg.list_size == 8 and cfg.mpa_iterations == 1


# --- profile validation hook ------------------------------------------------------------


def test_validate_profile_threshold():
    cfg = _tiny_cfg()
    res = validate_profile(cfg, snr_db=40.0, fer_threshold=0.5, max_frames=16, min_frame_errors=4)
    assert res.ok and res.fer <= 0.5
    assert res.bound_only == (res.frame_errors == 0)
    res = validate_profile(cfg, snr_db=-10.0, fer_threshold=1e-3, max_frames=16, min_frame_errors=4)
    assert not res.ok and not res.bound_only
