#!/usr/bin/env python3
"""Capacity-rule rate design plus frozen-set sidecar files.

Estimates per-level capacities over an SNR grid, picks the first grid point
whose total reaches the target spectral efficiency, rounds the per-level
payloads, and writes one frozen-set JSON per simulatable level.
"""

import argparse
import json
from pathlib import Path

from polarnoma.capacity import biawgn_noise_for_capacity, design_rates
from polarnoma.mapping import LevelMapper
from polarnoma.polar import DesignChannelParam, design_frozen_set, save_frozen_set


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--snr-db", type=float, nargs="+", default=[4.0, 5.2, 7.0, 9.0])
    ap.add_argument("--target-rate", type=float, default=2.0)
    ap.add_argument("--block-length", type=int, default=256)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out-dir", default="designs")
    args = ap.parse_args()

    mapper = LevelMapper(args.levels)
    design = design_rates(
        mapper,
        args.block_length,
        args.target_rate,
        args.snr_db,
        num_samples=args.samples,
        seed=args.seed,
    )
    print(f"design SNR {design.design_snr_db:g} dB")
    for l, (c, k) in enumerate(zip(design.capacities.values, design.profile.info_counts)):
        note = "  (suppression candidate)" if l in design.suppression_candidates else ""
        print(f"  level {l}: capacity {c:.4f}  payload {k}{note}")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "block_length": args.block_length,
        "design_snr_db": design.design_snr_db,
        "info_counts": list(design.profile.info_counts),
        "suppression_candidates": list(design.suppression_candidates),
    }
    (out_dir / "profile.json").write_text(json.dumps(doc, indent=1) + "\n")

    for l, k in enumerate(design.profile.info_counts):
        if k == 0 or l in design.suppression_candidates:
            continue
        c = min(max(design.capacities.values[l], 1e-3), 1.0 - 1e-3)
        channel = DesignChannelParam("biawgn", biawgn_noise_for_capacity(c))
        frozen = design_frozen_set(args.block_length, k, channel)
        path = out_dir / f"frozen_n{args.block_length}_k{k}_level{l}.json"
        save_frozen_set(path, args.block_length, k, frozen, channel)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
