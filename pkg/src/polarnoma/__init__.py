"""Multi-level polar-coded modulation over a sparse multi-user uplink.

The package splits along the processing chain: :mod:`polarnoma.crc` and
:mod:`polarnoma.polar` cover the per-level codes, :mod:`polarnoma.mapping`
the set-partitioned constellation, :mod:`polarnoma.capacity` the rate
design, :mod:`polarnoma.scma` the multi-user channel and staged detector,
:mod:`polarnoma.complexity` the term-count accounting, and
:mod:`polarnoma.simulate` the Monte Carlo harness behind the CLI.
"""

from .capacity import (
    BitLevelCapacities,
    InfeasibleRateError,
    RateDesign,
    biawgn_capacity,
    biawgn_noise_for_capacity,
    design_rates,
    estimate_bit_level_capacities,
    estimate_symbol_mi,
    largest_remainder_counts,
    snr_db_to_noise_variance,
    validate_profile,
)
from .complexity import (
    ComplexityReport,
    RatioPoint,
    build_report,
    count_fn_terms,
    flops_bicm,
    flops_mlcm,
    flops_ratio,
    ratio_curve,
    write_ratio_curve_csv,
)
from .crc import CRC8_DEFAULT, CrcSpec, attach_crc, check_crc, crc_remainder
from .mapping import LevelMapper, RateProfile, split_bits
from .polar import (
    DesignChannelParam,
    PolarCodeSpec,
    channel_reliabilities,
    design_frozen_set,
    encode,
    load_frozen_set,
    polar_transform,
    save_frozen_set,
    sc_decode,
    scl_decode,
)
from .scma import (
    ChannelRealization,
    MpaOptions,
    MsdResult,
    ScmaGraph,
    TermCounter,
    fn_update_bicm,
    fn_update_mlcm,
    mpa_detect_stage,
    mpa_detect_symbols,
    msd_receive,
    sample_channel,
    transmit,
)
from .simulate import (
    FerPoint,
    FerResult,
    FrameOutcome,
    SimConfig,
    build_level_specs,
    clopper_pearson,
    default_scenario,
    load_sim_config,
    run_fer,
    run_frame,
    write_fer_csv,
)

__version__ = "0.1.0"
