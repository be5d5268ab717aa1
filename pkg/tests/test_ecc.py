import numpy as np
import pytest

from latentmark.ecc import DEFAULT_T, EccConfig, ecc_decode, ecc_encode, parity_bits


@pytest.fixture(scope="module")
def cfg64():
    return EccConfig.for_payload(64, t=DEFAULT_T)


def test_default_payload_code_shape(cfg64):
    # shortened from the (127, 92) t=5 code over GF(2^7)
    assert cfg64.field_degree == 7
    assert cfg64.data_length == 64
    assert cfg64.codeword_length == 99
    assert cfg64.correctable_errors == 5


def test_channel_sized_code():
    cfg = EccConfig.for_channel(32, t=5)
    assert cfg.codeword_length == 32
    assert cfg.correctable_errors == 5
    assert cfg.data_length == 32 - parity_bits(cfg.field_degree, 5)
    tiny = EccConfig.for_channel(8, t=5)
    assert tiny.codeword_length == 8
    assert tiny.data_length >= 1  # t stepped down to fit


def test_invalid_configs():
    with pytest.raises(ValueError):
        EccConfig(codeword_length=20, data_length=25, correctable_errors=5, field_degree=7)
    with pytest.raises(ValueError):
        EccConfig(codeword_length=99, data_length=64, correctable_errors=0, field_degree=7)


def test_zero_data_zero_codeword(cfg64):
    cw = ecc_encode(np.zeros(64, dtype=np.uint8), cfg64)
    assert not cw.any()


def test_length_validation(cfg64):
    with pytest.raises(ValueError):
        ecc_encode(np.zeros(63, dtype=np.uint8), cfg64)
    with pytest.raises(ValueError):
        ecc_decode(np.zeros(98, dtype=np.uint8), cfg64)


def test_clean_roundtrip(cfg64):
    rng = np.random.default_rng(0)
    for _ in range(50):
        data = rng.integers(0, 2, 64, dtype=np.uint8)
        decoded, corrected = ecc_decode(ecc_encode(data, cfg64), cfg64)
        assert corrected
        assert np.array_equal(decoded, data)


def test_roundtrip_with_flips(cfg64):
    rng = np.random.default_rng(1)
    for trial in range(1000):
        data = rng.integers(0, 2, 64, dtype=np.uint8)
        cw = ecc_encode(data, cfg64)
        nflips = int(rng.integers(0, cfg64.correctable_errors + 1))
        pos = rng.choice(cfg64.codeword_length, size=nflips, replace=False)
        cw[pos] ^= 1
        decoded, corrected = ecc_decode(cw, cfg64)
        assert corrected, f"trial {trial} with {nflips} flips"
        assert np.array_equal(decoded, data)


def test_overload_reports_uncorrected(cfg64):
    rng = np.random.default_rng(2)
    t = cfg64.correctable_errors
    failures = 0
    trials = 500
    for _ in range(trials):
        data = rng.integers(0, 2, 64, dtype=np.uint8)
        cw = ecc_encode(data, cfg64)
        pos = rng.choice(cfg64.codeword_length, size=2 * t + 1, replace=False)
        cw[pos] ^= 1
        _, corrected = ecc_decode(cw, cfg64)
        failures += not corrected
    assert failures / trials >= 0.99


def test_half_flipped_uncorrectable(cfg64):
    rng = np.random.default_rng(3)
    failures = 0
    for _ in range(200):
        data = rng.integers(0, 2, 64, dtype=np.uint8)
        cw = ecc_encode(data, cfg64)
        pos = rng.choice(cfg64.codeword_length, size=cfg64.codeword_length // 2, replace=False)
        cw[pos] ^= 1
        _, corrected = ecc_decode(cw, cfg64)
        failures += not corrected
    assert failures / 200 >= 0.99


def test_best_effort_returns_received_data(cfg64):
    data = np.ones(64, dtype=np.uint8)
    cw = ecc_encode(data, cfg64)
    cw[:20] ^= 1  # way past t, confined to the data segment
    decoded, corrected = ecc_decode(cw, cfg64)
    if not corrected:
        assert np.array_equal(decoded, cw[:64])
