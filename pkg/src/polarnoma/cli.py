"""Command line front end.

Subcommands: ``run-fer`` (Monte Carlo sweep to CSV), ``design-rates``
(capacity-rule payload split), ``estimate-capacity`` (per-level mutual
information table), ``complexity`` (detector term counts), ``dump-constellation``
(mapper inspection), ``selftest`` (quick end-to-end battery).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import (
    design_rates,
    estimate_bit_level_capacities,
    estimate_symbol_mi,
    snr_db_to_noise_variance,
)
from .complexity import build_report, ratio_curve, write_ratio_curve_csv
from .crc import CrcSpec
from .mapping import LevelMapper
from .polar import (
    DesignChannelParam,
    PolarCodeSpec,
    design_frozen_set,
    encode,
    save_frozen_set,
    scl_decode,
)
from .capacity import biawgn_noise_for_capacity
from .simulate import (
    SimConfig,
    default_scenario,
    load_sim_config,
    run_fer,
    write_fer_csv,
)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _cmd_run_fer(args) -> int:
    cfg = load_sim_config(args.config) if args.config else default_scenario()
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.snr_db:
        overrides["snr_grid_db"] = tuple(args.snr_db)
    if args.max_frames is not None:
        overrides["max_frames"] = args.max_frames
    if args.min_errors is not None:
        overrides["min_frame_errors"] = args.min_errors
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.list_size is not None:
        overrides["list_size"] = args.list_size
    if args.mpa_iterations is not None:
        overrides["mpa_iterations"] = args.mpa_iterations
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)

    def report(point):
        print(
            f"snr {point.snr_db:6.2f} dB  fer {point.fer:.5f} "
            f"[{point.ci_low:.5f}, {point.ci_high:.5f}]  "
            f"errors {point.frame_errors}/{point.frames}",
            flush=True,
        )

    result = run_fer(cfg, workers=args.workers, on_point=report)
    write_fer_csv(result, args.output)
    print(f"wrote {args.output}")
    return 0


def _cmd_design_rates(args) -> int:
    mapper = LevelMapper(args.L)
    design = design_rates(
        mapper,
        args.block_length,
        args.target_rate,
        args.snr_db,
        num_samples=args.samples,
        seed=args.seed,
        crc_degree=args.crc_degree,
    )
    caps = design.capacities
    print(f"selected snr: {design.design_snr_db:g} dB (sigma2 {design.noise_variance:.6g})")
    print(f"total capacity: {caps.total:.4f} bits/symbol, target {args.target_rate:g}")
    for l, (c, k) in enumerate(zip(caps.values, design.profile.info_counts)):
        mark = " (suppression candidate)" if l in design.suppression_candidates else ""
        print(f"  level {l}: capacity {c:.4f}  payload {k}{mark}")
    if args.profile_json:
        doc = {
            "block_length": design.profile.block_length,
            "info_counts": list(design.profile.info_counts),
            "design_snr_db": design.design_snr_db,
            "suppression_candidates": list(design.suppression_candidates),
        }
        Path(args.profile_json).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        print(f"wrote {args.profile_json}")
    if args.capacity_csv:
        header = "snr_db," + ",".join(f"c{l}" for l in range(args.L)) + ",total"
        lines = [header]
        for idx, snr_db in enumerate(sorted(args.snr_db)):
            est = estimate_bit_level_capacities(
                mapper,
                snr_db_to_noise_variance(snr_db),
                args.samples,
                seed=np.random.SeedSequence((args.seed, idx)),
            )
            vals = ",".join(f"{v:.6f}" for v in est.values)
            lines.append(f"{snr_db:g},{vals},{est.total:.6f}")
        Path(args.capacity_csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.capacity_csv}")
    if args.save_frozen_dir:
        outdir = Path(args.save_frozen_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        for l, k in enumerate(design.profile.info_counts):
            if k == 0 or l in design.suppression_candidates:
                continue
            c = min(max(caps.values[l], 1e-3), 1.0 - 1e-3)
            channel = DesignChannelParam("biawgn", biawgn_noise_for_capacity(c))
            frozen = design_frozen_set(args.block_length, k, channel)
            path = outdir / f"frozen_n{args.block_length}_k{k}_level{l}.json"
            save_frozen_set(path, args.block_length, k, frozen, channel)
            print(f"  wrote {path}")
    return 0


def _cmd_estimate_capacity(args) -> int:
    mapper = LevelMapper(args.L)
    for snr_db in args.snr_db:
        sigma2 = snr_db_to_noise_variance(snr_db)
        caps = estimate_bit_level_capacities(mapper, sigma2, args.samples, seed=args.seed)
        mi, mi_err = estimate_symbol_mi(mapper, sigma2, args.samples, seed=args.seed)
        per_level = "  ".join(
            f"C{l}={v:.4f}±{e:.4f}" for l, (v, e) in enumerate(zip(caps.values, caps.std_errors))
        )
        print(f"snr {snr_db:6.2f} dB  {per_level}  sum={caps.total:.4f}  I(x;y)={mi:.4f}±{mi_err:.4f}")
    return 0


def _cmd_complexity(args) -> int:
    active = args.levels
    report = build_report(args.L, args.U, args.mpa_iterations, active)
    print(
        f"constellation levels {report.levels}, users/subcarrier "
        f"{report.users_per_subcarrier}, {report.mpa_iterations} symbol-level pass(es)"
    )
    for stage, terms in report.stage_terms:
        print(f"  stage {stage}: {terms} terms per function node per symbol")
    print(f"staged total: {report.mlcm_total}")
    print(f"symbol-level total: {report.bicm_total}")
    print(f"ratio: {report.ratio} = {float(report.ratio):.4f}")
    if args.curve:
        points = ratio_curve(args.L, args.mpa_iterations, args.curve, active)
        for p in points:
            print(
                f"  U={p.users_per_subcarrier}: symbol-level {p.bicm_terms}, "
                f"staged {p.mlcm_terms}, ratio {float(p.ratio):.4f}"
            )
        if args.output:
            write_ratio_curve_csv(args.output, args.L, args.mpa_iterations, args.curve, active)
            print(f"wrote {args.output}")
    elif args.output:
        write_ratio_curve_csv(args.output, args.L, args.mpa_iterations, (args.U,), active)
        print(f"wrote {args.output}")
    return 0


def _cmd_dump_constellation(args) -> int:
    mapper = LevelMapper(args.L)
    lines = []
    if args.prefix:
        prefix = [int(c) for c in args.prefix]
        if any(b not in (0, 1) for b in prefix):
            raise ValueError("prefix must be a string of 0s and 1s")
        lines.append("remaining_bits,i,q")
        for point, rem in mapper.subconstellation(prefix):
            bits = "".join(str(b) for b in rem) or "-"
            lines.append(f"{bits},{point.real:.10g},{point.imag:.10g}")
    else:
        lines.append("label," + ",".join(f"c{l}" for l in range(args.L)) + ",i,q")
        for label in range(2**args.L):
            bits = ",".join(str((label >> l) & 1) for l in range(args.L))
            point = complex(mapper.points[label])
            lines.append(f"{label},{bits},{point.real:.10g},{point.imag:.10g}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(text, end="")
    return 0


def _cmd_selftest(args) -> int:
    failures = []

    def check(name, ok):
        print(f"  {'ok' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    rng = np.random.default_rng(1)
    crc = CrcSpec(degree=8, poly=0x107)
    frozen = design_frozen_set(64, 40, DesignChannelParam("biawgn", 0.5))
    spec = PolarCodeSpec(64, 40, frozen, crc=crc, list_size=4)
    data = rng.integers(0, 2, size=spec.data_count, dtype=np.uint8)
    cw = encode(data, spec)
    llr = (1.0 - 2.0 * cw.astype(float)) * 6.0
    decoded, ok = scl_decode(llr, spec)
    check("polar encode/decode roundtrip", ok and np.array_equal(decoded, data))

    mapper = LevelMapper(4)
    labels = {complex(mapper.points[i]) for i in range(16)}
    check("mapper bijection (16 points)", len(labels) == 16)
    energy = float(np.mean(np.abs(mapper.points) ** 2))
    check("unit average symbol energy", abs(energy - 1.0) < 1e-12)

    report = build_report(4, 3, mpa_iterations=2, active_levels=(1, 2, 3))
    check("staged term count 584", report.mlcm_total == 584)
    check("symbol-level term count 8192", report.bicm_total == 8192)

    cfg = dataclasses.replace(
        default_scenario(),
        block_length=32,
        info_counts=(0, 12, 16, 24),
        snr_grid_db=(16.0,),
        max_frames=8,
        min_frame_errors=10_000,
        frames_per_batch=4,
        design_samples=20_000,
    )
    result = run_fer(cfg)
    point = result.points[0]
    check(
        "end-to-end sweep bookkeeping",
        point.channel_frames == 8
        and point.frames == 8 * cfg.graph.num_users
        and 0.0 <= point.fer <= 1.0
        and point.ci_low <= point.fer <= point.ci_high,
    )

    if failures:
        print(f"selftest failed: {failures}")
        return 1
    print("selftest ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarnoma",
        description="Multi-level polar-coded sparse multiple access link simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-fer", help="run a frame-error-rate sweep and write CSV")
    p.add_argument("--config", help="scenario file (.toml/.json); bundled default otherwise")
    p.add_argument("--output", default="fer.csv", help="output CSV path (default fer.csv)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--mode", choices=("standard", "genie", "crc_iterated"))
    p.add_argument("--snr-db", type=float, nargs="+", help="override the SNR grid")
    p.add_argument("--max-frames", type=int, help="cap on channel frames per point")
    p.add_argument("--min-errors", type=int, help="user-frame errors to stop at")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--list-size", type=int, help="decoder list size override")
    p.add_argument("--mpa-iterations", type=int, help="detector passes per stage")
    p.set_defaults(func=_cmd_run_fer)

    p = sub.add_parser("design-rates", help="capacity-rule per-level payload design")
    p.add_argument("--snr-db", type=float, nargs="+", required=True, help="candidate SNR grid")
    p.add_argument("--target-rate", type=float, default=2.0, help="bits/symbol including CRC")
    p.add_argument("--block-length", type=int, default=256)
    p.add_argument("--L", "-L", type=int, default=4, help="constellation levels")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--crc-degree", type=int, default=8)
    p.add_argument("--profile-json", help="write the designed rate profile as JSON")
    p.add_argument("--capacity-csv", help="write per-grid-SNR capacities as CSV")
    p.add_argument("--save-frozen-dir", help="write per-level frozen-set sidecar files here")
    p.set_defaults(func=_cmd_design_rates)

    p = sub.add_parser("estimate-capacity", help="per-level mutual information table")
    p.add_argument("--snr-db", type=float, nargs="+", required=True)
    p.add_argument("--L", "-L", type=int, default=4, help="constellation levels")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_estimate_capacity)

    p = sub.add_parser("complexity", help="detector term counts and ratio curve")
    p.add_argument("--L", "-L", type=int, default=4, help="constellation levels")
    p.add_argument("--U", "-U", type=int, default=3, help="users per subcarrier")
    p.add_argument(
        "--levels", type=_int_list, default=None,
        help="comma-separated staged levels, e.g. 1,2,3 (default: all)",
    )
    p.add_argument("--mpa-iterations", type=int, default=1)
    p.add_argument(
        "--curve", type=_int_list,
        help="comma-separated overload factors for a ratio curve, e.g. 2,3,4,5,6",
    )
    p.add_argument("--output", help="write the ratio curve as CSV")
    p.set_defaults(func=_cmd_complexity)

    p = sub.add_parser(
        "dump-constellation", help="emit the set-partitioned constellation as CSV"
    )
    p.add_argument("--L", "-L", type=int, default=4, help="constellation levels")
    p.add_argument("--prefix", help="fix the lowest bits, e.g. 01 (low level first)")
    p.add_argument("--output", help="CSV destination (default stdout)")
    p.set_defaults(func=_cmd_dump_constellation)

    p = sub.add_parser("selftest", help="quick end-to-end sanity battery")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        # invalid configuration counts as a usage error
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
