import numpy as np
import pytest
from scipy import stats

from raspt.channel import draw_cirs, pedestrian_b
from raspt.decoder import bpsk_modulate
from raspt.sequences import PreambleId, generate_preamble
from raspt.uplink import (
    DeviceRealization,
    compose_prach,
    compose_spt,
    select_preambles,
)

N_ZC, N_CS, N_SC = 839, 13, 839


def _device(pid, m=2, payload=None, cirs=None, rng=None):
    rng = rng or np.random.default_rng(0)
    if payload is None:
        payload = rng.integers(0, 2, N_SC).astype(np.uint8)
    if cirs is None:
        cirs = draw_cirs(pedestrian_b(), m, rng, N_CS)
    return DeviceRealization(pid, payload, cirs)


def test_select_single_device_bounds():
    rng = np.random.default_rng(1)
    for _ in range(200):
        (pid,) = select_preambles(1, [1], 64, rng)
        assert pid.root == 1
        assert 1 <= pid.shift <= 64


def test_select_rejects_bad_counts():
    rng = np.random.default_rng(1)
    with pytest.raises(ValueError):
        select_preambles(0, [1], 64, rng)
    with pytest.raises(ValueError):
        select_preambles(1, [], 64, rng)


def test_select_collision_frequency_matches_formula():
    rng = np.random.default_rng(2)
    n = 100000
    draws = select_preambles(2 * n, [1], 64, rng)
    hits = sum(draws[2 * i] == draws[2 * i + 1] for i in range(n))
    p = 1 / 64
    sigma = np.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) < 3 * sigma


def test_select_root_marginal_uniform():
    rng = np.random.default_rng(3)
    roots = [2, 5, 11, 23, 40]
    ids = select_preambles(50000, roots, 64, rng)
    counts = np.array([sum(pid.root == r for pid in ids) for r in roots])
    _, pvalue = stats.chisquare(counts)
    assert pvalue > 0.01


def test_select_shift_marginal_uniform():
    rng = np.random.default_rng(4)
    ids = select_preambles(64000, [1], 64, rng)
    counts = np.bincount([pid.shift for pid in ids], minlength=65)[1:]
    _, pvalue = stats.chisquare(counts)
    assert pvalue > 0.01


def test_compose_prach_zero_devices_is_noise():
    out = compose_prach([], 3, N_ZC, N_CS, 1.0, 1.0, np.random.default_rng(5))
    assert out.shape == (3, N_ZC)
    assert np.mean(np.abs(out) ** 2) == pytest.approx(1.0, rel=0.05)


def test_compose_prach_single_device_identity():
    pid = PreambleId(7, 3)
    dev = _device(pid, m=2, cirs=np.array([[1.0 + 0j], [1.0 + 0j]]))
    out = compose_prach([dev], 2, N_ZC, N_CS, 1.0, 0.0, np.random.default_rng(6))
    x = generate_preamble(pid, N_CS, N_ZC)
    np.testing.assert_allclose(out[0], x, atol=1e-12)
    np.testing.assert_allclose(out[1], x, atol=1e-12)


def test_compose_prach_linearity():
    rng = np.random.default_rng(7)
    devs = [_device(PreambleId(3, p), m=2, rng=rng) for p in (1, 5, 9)]
    both = compose_prach(devs, 2, N_ZC, N_CS, 2.0, 0.0, np.random.default_rng(0))
    parts = sum(
        compose_prach([d], 2, N_ZC, N_CS, 2.0, 0.0, np.random.default_rng(0))
        for d in devs
    )
    np.testing.assert_allclose(both, parts, atol=1e-10)


def test_compose_prach_antenna_count_mismatch():
    dev = _device(PreambleId(1, 1), m=2)
    with pytest.raises(ValueError):
        compose_prach([dev], 3, N_ZC, N_CS, 1.0, 0.0, np.random.default_rng(0))


def test_compose_prach_power_linear_in_devices():
    # E||y||^2 = N_I * beta * N_zc + N_zc * sigma2.
    rng = np.random.default_rng(8)
    beta = 3.0
    for n_i in (1, 4):
        energy = []
        for _ in range(3000):
            devs = [
                _device(PreambleId(2, 1 + 7 * i), m=1, rng=rng) for i in range(n_i)
            ]
            y = compose_prach(devs, 1, N_ZC, N_CS, beta, 0.0, rng)
            energy.append(np.sum(np.abs(y) ** 2))
        assert np.mean(energy) == pytest.approx(n_i * beta * N_ZC, rel=0.05)


def test_compose_spt_flat_channel_recovers_symbols():
    payload = np.array([0, 1, 1, 0] * 210, dtype=np.uint8)[:N_SC]
    cirs = np.ones((2, 1), dtype=complex)
    dev = DeviceRealization(PreambleId(1, 1), payload, cirs)
    out = compose_spt([dev], 2, N_SC, 1.0, 0.0, np.random.default_rng(9))
    np.testing.assert_allclose(out[0], bpsk_modulate(payload), atol=1e-12)


def test_compose_spt_orthogonal_antenna_channels():
    payload_a = np.zeros(N_SC, dtype=np.uint8)
    payload_b = np.ones(N_SC, dtype=np.uint8)
    dev_a = DeviceRealization(PreambleId(1, 1), payload_a,
                              np.array([[1.0 + 0j], [0.0 + 0j]]))
    dev_b = DeviceRealization(PreambleId(1, 2), payload_b,
                              np.array([[0.0 + 0j], [1.0 + 0j]]))
    out = compose_spt([dev_a, dev_b], 2, N_SC, 1.0, 0.0, np.random.default_rng(10))
    np.testing.assert_allclose(out[0], bpsk_modulate(payload_a), atol=1e-12)
    np.testing.assert_allclose(out[1], bpsk_modulate(payload_b), atol=1e-12)


def test_compose_spt_payload_length_checked():
    dev = DeviceRealization(PreambleId(1, 1), np.zeros(10, dtype=np.uint8),
                            np.ones((1, 1), dtype=complex))
    with pytest.raises(ValueError):
        compose_spt([dev], 1, N_SC, 1.0, 0.0, np.random.default_rng(0))


def test_compose_spt_power_accounting():
    # E[|Y|^2] = N_I * beta + sigma2 per subcarrier.
    rng = np.random.default_rng(11)
    n_i, beta, sigma2 = 3, 2.0, 0.5
    acc = []
    for _ in range(300):
        devs = [_device(PreambleId(2, 1 + 5 * i), m=1, rng=rng) for i in range(n_i)]
        y = compose_spt(devs, 1, N_SC, beta, sigma2, rng)
        acc.append(np.mean(np.abs(y) ** 2))
    assert np.mean(acc) == pytest.approx(n_i * beta + sigma2, rel=0.05)
