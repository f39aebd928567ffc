import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarnoma.crc import CrcSpec, check_crc
from polarnoma.polar import (
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

from oracles import ml_codeword_decode, successive_map_decode


def _spec_n8k4():
    frozen = design_frozen_set(8, 4, DesignChannelParam("bec", 0.5))
    return PolarCodeSpec(block_length=8, info_count=4, frozen_indices=frozen)


def _noisy_llr(spec, rng, noise_std=1.0):
    data = rng.integers(0, 2, spec.data_count).astype(np.uint8)
    x = encode(data, spec)
    y = (1.0 - 2.0 * x) + noise_std * rng.standard_normal(x.size)
    return data, 2.0 * y / noise_std**2


# --- transform ---------------------------------------------------------------


def test_transform_known_pair():
    np.testing.assert_array_equal(polar_transform([0, 0, 1, 1]), [0, 1, 0, 1])


@given(st.integers(1, 5), st.integers(0, 2**31))
def test_transform_is_involution(stages, seed):
    u = np.random.default_rng(seed).integers(0, 2, 1 << stages).astype(np.uint8)
    np.testing.assert_array_equal(polar_transform(polar_transform(u)), u)


@given(st.integers(1, 4), st.integers(0, 2**31))
def test_transform_linear_over_xor(stages, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 2, (2, 1 << stages)).astype(np.uint8)
    np.testing.assert_array_equal(
        polar_transform(a ^ b), polar_transform(a) ^ polar_transform(b)
    )


@pytest.mark.parametrize("stages", [1, 2, 3, 4])
def test_transform_matches_kronecker_matrix(stages, rng):
    g = np.array([[1, 0], [1, 1]], np.uint8)
    mat = np.array([[1]], np.uint8)
    for _ in range(stages):
        mat = np.kron(mat, g)
    u = rng.integers(0, 2, mat.shape[0]).astype(np.uint8)
    np.testing.assert_array_equal(polar_transform(u), (u @ mat) % 2)


def test_transform_rejects_bad_length():
    with pytest.raises(ValueError):
        polar_transform([0, 1, 0])


# --- construction ------------------------------------------------------------


def test_bec_reliabilities_quarter_code():
    rel = channel_reliabilities(4, DesignChannelParam("bec", 0.5))
    np.testing.assert_allclose(rel, [0.0625, 0.4375, 0.5625, 0.9375])


def test_bec_frozen_set_n8():
    assert design_frozen_set(8, 4, DesignChannelParam("bec", 0.5)) == (0, 1, 2, 4)


@pytest.mark.parametrize(
    "channel",
    [DesignChannelParam("bec", 0.3), DesignChannelParam("biawgn", 0.8)],
)
def test_frozen_sets_nest_as_rate_grows(channel):
    prev = None
    for k in range(1, 32):
        frozen = set(design_frozen_set(32, k, channel))
        if prev is not None:
            assert frozen < prev
        prev = frozen
    assert 31 not in set(design_frozen_set(32, 1, channel))


def test_ga_reliabilities_sorted_last_index_best():
    rel = channel_reliabilities(64, DesignChannelParam("biawgn", 1.0))
    assert rel.argmax() == 63
    assert rel.argmin() == 0
    assert np.all(rel >= 0) and rel[63] > rel[0]


@pytest.mark.parametrize(
    "kind,value", [("bec", 0.0), ("bec", 1.0), ("biawgn", 0.0), ("laplace", 0.5)]
)
def test_design_channel_validation(kind, value):
    with pytest.raises(ValueError):
        DesignChannelParam(kind, value)


def test_design_frozen_set_validation():
    with pytest.raises(ValueError):
        design_frozen_set(12, 4, DesignChannelParam("bec", 0.5))
    with pytest.raises(ValueError):
        design_frozen_set(8, 0, DesignChannelParam("bec", 0.5))


# --- spec and encoder --------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        PolarCodeSpec(6, 3, (0, 1, 2))
    with pytest.raises(ValueError):
        PolarCodeSpec(8, 4, (0, 1, 2))  # wrong frozen count
    with pytest.raises(ValueError):
        PolarCodeSpec(8, 4, (0, 1, 2, 2))
    with pytest.raises(ValueError):
        PolarCodeSpec(8, 4, (0, 1, 2, 9))
    with pytest.raises(ValueError):
        PolarCodeSpec(8, 4, (0, 1, 2, 4), crc=CrcSpec(4, 0x13))  # 4 info < 4+1
    with pytest.raises(ValueError):
        PolarCodeSpec(8, 4, (0, 1, 2, 4), list_size=0)


def test_encode_places_frozen_zeros():
    spec = _spec_n8k4()
    data = np.array([1, 0, 1, 1], np.uint8)
    x = encode(data, spec)
    u = polar_transform(x)  # involution recovers the input vector
    assert all(u[i] == 0 for i in spec.frozen_indices)
    info = [i for i in range(8) if i not in spec.frozen_indices]
    np.testing.assert_array_equal(u[info], data)


def test_encode_full_rate_equals_transform(rng):
    spec = PolarCodeSpec(16, 16, ())
    data = rng.integers(0, 2, 16).astype(np.uint8)
    np.testing.assert_array_equal(encode(data, spec), polar_transform(data))


def test_encode_with_crc_embeds_parity():
    spec = PolarCodeSpec(32, 12, tuple(range(20)), crc=CrcSpec(4, 0x13))
    assert spec.data_count == 8
    data = np.arange(8) % 2
    x = encode(data.astype(np.uint8), spec)
    u = polar_transform(x)
    info = [i for i in range(32) if i not in spec.frozen_indices]
    assert check_crc(u[info], spec.crc)


def test_encode_wrong_payload_length():
    with pytest.raises(ValueError):
        encode([1, 0], _spec_n8k4())


# --- decoding ----------------------------------------------------------------


@given(st.integers(0, 2**31), st.integers(2, 6))
def test_noiseless_roundtrip(seed, stages):
    rng = np.random.default_rng(seed)
    n = 1 << stages
    k = int(rng.integers(1, n + 1))
    spec = PolarCodeSpec(n, k, design_frozen_set(n, k, DesignChannelParam("bec", 0.5)))
    data = rng.integers(0, 2, k).astype(np.uint8)
    llr = 8.0 * (1.0 - 2.0 * encode(data, spec))
    out, ok = scl_decode(llr, spec, list_size=4)
    assert ok
    np.testing.assert_array_equal(out, data)
    np.testing.assert_array_equal(sc_decode(llr, spec)[0], data)


def test_sc_equals_list_one(rng):
    spec = _spec_n8k4()
    for _ in range(100):
        llr = 3.0 * rng.standard_normal(8)
        np.testing.assert_array_equal(
            sc_decode(llr, spec)[0], scl_decode(llr, spec, list_size=1)[0]
        )


def test_sc_matches_successive_map_oracle(rng):
    spec = _spec_n8k4()
    for _ in range(300):
        _, llr = _noisy_llr(spec, rng, noise_std=1.2)
        np.testing.assert_array_equal(
            sc_decode(llr, spec)[0], successive_map_decode(llr, spec, "uniform")
        )


@pytest.mark.parametrize("list_size", [16, 64])
def test_full_list_matches_ml_oracle(list_size, rng):
    # a list covering every message is exact maximum likelihood
    spec = _spec_n8k4()
    for _ in range(200):
        _, llr = _noisy_llr(spec, rng, noise_std=1.2)
        got, _ = scl_decode(llr, spec, list_size=list_size)
        np.testing.assert_array_equal(got, ml_codeword_decode(llr, spec))


def test_list_eight_rarely_worse_than_ml(rng):
    # not exact, but on an 8-of-16 list the gap should be tiny
    spec = _spec_n8k4()
    mismatch = sum(
        not np.array_equal(
            scl_decode(llr, spec, list_size=8)[0], ml_codeword_decode(llr, spec)
        )
        for llr in (_noisy_llr(spec, rng, noise_std=1.5)[1] for _ in range(300))
    )
    assert mismatch <= 15


def test_crc_aided_decode():
    crc = CrcSpec(4, 0x13)
    frozen = design_frozen_set(32, 16, DesignChannelParam("bec", 0.5))
    spec = PolarCodeSpec(32, 16, frozen, crc=crc, list_size=8)
    rng = np.random.default_rng(7)
    data = rng.integers(0, 2, spec.data_count).astype(np.uint8)
    llr = 8.0 * (1.0 - 2.0 * encode(data, spec))
    out, ok = scl_decode(llr, spec)
    assert ok and out.size == spec.data_count
    np.testing.assert_array_equal(out, data)
    # pure noise: some decodes must fail the check
    fails = sum(
        not scl_decode(4.0 * rng.standard_normal(32), spec)[1] for _ in range(60)
    )
    assert fails > 0


def test_decode_deterministic(rng):
    spec = _spec_n8k4()
    llr = rng.standard_normal(8) * 2.0
    first = scl_decode(llr, spec, list_size=4)
    for _ in range(5):
        again = scl_decode(llr, spec, list_size=4)
        np.testing.assert_array_equal(first[0], again[0])
        assert first[1] == again[1]


def test_decode_input_validation():
    spec = _spec_n8k4()
    with pytest.raises(ValueError):
        scl_decode(np.zeros(7), spec)
    with pytest.raises(ValueError):
        scl_decode(np.full(8, np.nan), spec)
    with pytest.raises(ValueError):
        scl_decode(np.zeros(8), spec, list_size=0)


# --- sidecar files -----------------------------------------------------------


def test_frozen_set_sidecar_roundtrip(tmp_path):
    frozen = design_frozen_set(64, 40, DesignChannelParam("biawgn", 0.5))
    path = tmp_path / "n64_k40.json"
    save_frozen_set(path, 64, 40, frozen, DesignChannelParam("biawgn", 0.5))
    n, k, loaded, channel = load_frozen_set(path)
    assert (n, k) == (64, 40)
    assert loaded == frozen
    assert channel == DesignChannelParam("biawgn", 0.5)


def test_frozen_set_sidecar_without_channel(tmp_path):
    path = tmp_path / "plain.json"
    save_frozen_set(path, 8, 4, (0, 1, 2, 4))
    assert load_frozen_set(path) == (8, 4, (0, 1, 2, 4), None)
