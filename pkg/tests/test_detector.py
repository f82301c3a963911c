import numpy as np
import pytest

from raspt.channel import draw_cirs, pedestrian_b
from raspt.detector import (
    DetectedPreamble,
    correlate_root,
    detect_active,
    estimate_channels,
    extract_cir,
    reconstruct_root_signal,
    separate_roots,
)
from raspt.sequences import PreambleId, generate_preamble, zc_sequence
from raspt.uplink import DeviceRealization, compose_prach

N_ZC, N_CS, N_P = 839, 13, 64


def _scene(ids, m, beta=1.0, sigma2=0.0, seed=0, cirs=None):
    """Compose a PRACH observation for the given preambles; returns (y, devices)."""
    rng = np.random.default_rng(seed)
    devices = []
    for i, pid in enumerate(ids):
        h = cirs[i] if cirs is not None else draw_cirs(pedestrian_b(), m, rng, N_CS)
        devices.append(DeviceRealization(pid, np.zeros(1, dtype=np.uint8), h))
    y = compose_prach(devices, m, N_ZC, N_CS, beta, sigma2, rng)
    return y, devices


def _padded(cirs, n_cs=N_CS):
    out = np.zeros((cirs.shape[0], n_cs), dtype=complex)
    out[:, : cirs.shape[1]] = cirs
    return out


def test_correlate_root_matched_peak():
    y, _ = _scene([PreambleId(4, 9)], m=1, cirs=[np.ones((1, 1), complex)])
    profile = correlate_root(y[0], 4)
    assert abs(profile.values[9 * N_CS]) == pytest.approx(N_ZC, rel=1e-12)


def test_correlate_root_foreign_root_flat():
    y, _ = _scene([PreambleId(4, 9)], m=1, cirs=[np.ones((1, 1), complex)])
    profile = correlate_root(y[0], 7)
    np.testing.assert_allclose(np.abs(profile.values), np.sqrt(N_ZC), rtol=1e-6)


def test_correlate_root_zeros():
    profile = correlate_root(np.zeros(N_ZC, dtype=complex), 3)
    assert np.all(profile.values == 0)


def test_extract_cir_noise_free_round_trip():
    rng = np.random.default_rng(1)
    h = draw_cirs(pedestrian_b(), 1, rng, N_CS)
    y, _ = _scene([PreambleId(6, 11)], m=1, cirs=[h])
    est = extract_cir(correlate_root(y[0], 6), 11, N_CS)
    np.testing.assert_allclose(est, _padded(h)[0], atol=1e-12)


def test_extract_cir_noise_gain():
    # Pure noise at sigma^2 = 1: every window bin carries power 1/N_zc.
    rng = np.random.default_rng(2)
    acc = []
    for _ in range(2000):
        noise = (rng.standard_normal(N_ZC) + 1j * rng.standard_normal(N_ZC)) / np.sqrt(2)
        est = extract_cir(correlate_root(noise, 5), 7, N_CS)
        acc.append(np.abs(est) ** 2)
    assert np.mean(acc) == pytest.approx(1 / N_ZC, rel=0.05)


def test_extract_cir_disjoint_shifts():
    rng = np.random.default_rng(3)
    h1 = draw_cirs(pedestrian_b(), 1, rng, N_CS)
    h2 = draw_cirs(pedestrian_b(), 1, rng, N_CS)
    y, _ = _scene([PreambleId(2, 5), PreambleId(2, 6)], m=1, cirs=[h1, h2])
    profile = correlate_root(y[0], 2)
    np.testing.assert_allclose(extract_cir(profile, 5, N_CS), _padded(h1)[0], atol=1e-12)
    np.testing.assert_allclose(extract_cir(profile, 6, N_CS), _padded(h2)[0], atol=1e-12)


def test_detect_active_noise_free_single():
    y, _ = _scene([PreambleId(3, 17)], m=2, cirs=[np.ones((2, 1), complex)])
    profiles = [correlate_root(y[m], 3, m) for m in range(2)]
    assert detect_active(profiles, 10.0, N_CS, N_P) == [17]
    assert detect_active(profiles, 2.0, N_CS, N_P) == [17]


def test_detect_active_false_alarm_rate():
    rng = np.random.default_rng(4)
    false_alarms = 0
    trials = 10000
    for _ in range(trials):
        noise = (rng.standard_normal(N_ZC) + 1j * rng.standard_normal(N_ZC)) / np.sqrt(2)
        false_alarms += len(detect_active([correlate_root(noise, 1)], 10.0, N_CS, N_P))
    assert false_alarms / trials < 0.1


def test_detect_active_detection_probability_low_snr():
    # Single active preamble at SNR 5 dB, M = 8 antennas.
    rng = np.random.default_rng(5)
    beta = 10 ** 0.5
    trials, misses = 10000, 0
    for _ in range(trials):
        h = draw_cirs(pedestrian_b(), 8, rng, N_CS)
        dev = DeviceRealization(PreambleId(1, 30), np.zeros(1, np.uint8), h)
        y = compose_prach([dev], 8, N_ZC, N_CS, beta, 1.0, rng)
        profiles = [correlate_root(y[m], 1, m) for m in range(8)]
        if 30 not in detect_active(profiles, 10.0, N_CS, N_P):
            misses += 1
    assert 1 - misses / trials > 0.99


def test_detect_active_needs_profiles_and_positive_threshold():
    with pytest.raises(ValueError):
        detect_active([], 10.0, N_CS)
    y, _ = _scene([PreambleId(3, 1)], m=1)
    with pytest.raises(ValueError):
        detect_active([correlate_root(y[0], 3)], 0.0, N_CS)


def test_reconstruct_exact_estimate_rebuilds_component():
    rng = np.random.default_rng(6)
    h = draw_cirs(pedestrian_b(), 2, rng, N_CS)
    pid = PreambleId(5, 12)
    y, _ = _scene([pid], m=2, beta=4.0, cirs=[h])
    det = DetectedPreamble(pid, _padded(h), 0.0)
    recon = reconstruct_root_signal([det], 4.0, N_ZC, N_CS)
    np.testing.assert_allclose(recon, y, atol=1e-10)


def test_reconstruct_rejects_empty_or_mixed_roots():
    with pytest.raises(ValueError):
        reconstruct_root_signal([], 1.0, N_ZC, N_CS)
    dets = [
        DetectedPreamble(PreambleId(1, 1), np.ones((1, N_CS), complex), 0.0),
        DetectedPreamble(PreambleId(2, 1), np.ones((1, N_CS), complex), 0.0),
    ]
    with pytest.raises(ValueError):
        reconstruct_root_signal(dets, 1.0, N_ZC, N_CS)


def test_separate_roots_single_root_is_identity():
    y, _ = _scene([PreambleId(1, 3)], m=2, sigma2=1.0, seed=7)
    out = separate_roots(y, [1], N_CS, genie_info=[PreambleId(1, 3)])
    assert len(out) == 1
    assert out[0] is y


def test_separate_roots_empty_scene_returns_observation():
    rng = np.random.default_rng(8)
    y = (rng.standard_normal((2, N_ZC)) + 1j * rng.standard_normal((2, N_ZC)))
    out = separate_roots(y, [1, 2], N_CS, genie_info=[])
    for y_root in out:
        np.testing.assert_allclose(y_root, y, atol=1e-12)


def test_separate_roots_requires_genie_info():
    y = np.zeros((1, N_ZC), dtype=complex)
    with pytest.raises(ValueError):
        separate_roots(y, [1, 2], N_CS, mode="genie", genie_info=None)
    with pytest.raises(ValueError):
        separate_roots(y, [1, 2], N_CS, mode="oracle", genie_info=[])


def test_separation_error_shrinks_per_iteration():
    ids = [PreambleId(1, 5), PreambleId(2, 20)]
    rng = np.random.default_rng(9)
    cirs = [draw_cirs(pedestrian_b(), 1, rng, N_CS) for _ in ids]
    y, devices = _scene(ids, m=1, cirs=cirs)
    truth = [
        compose_prach([dev], 1, N_ZC, N_CS, 1.0, 0.0, np.random.default_rng(0))
        for dev in devices
    ]
    errors = []
    for iters in (1, 2, 3):
        sep = separate_roots(y, [1, 2], N_CS, iterations=iters, genie_info=ids)
        err = sum(np.sum(np.abs(s - t) ** 2) for s, t in zip(sep, truth))
        errors.append(err)
    assert errors[0] > errors[1] > errors[2]


def test_separation_beats_raw_extraction():
    # Two devices on different roots, noise-free: raw per-bin interference
    # sits at the 1/N_zc cross-correlation floor; three PIC rounds push the
    # estimate error well below 1e-4.
    ids = [PreambleId(1, 5), PreambleId(2, 20)]
    raw_err, pic_err = [], []
    for seed in range(40):
        rng = np.random.default_rng(100 + seed)
        cirs = [draw_cirs(pedestrian_b(), 1, rng, N_CS) for _ in ids]
        y, _ = _scene(ids, m=1, cirs=cirs, seed=200 + seed)
        raw = extract_cir(correlate_root(y[0], 1), 5, N_CS)
        raw_err.append(np.mean(np.abs(raw - _padded(cirs[0])[0]) ** 2))
        dets = estimate_channels(y, [1, 2], N_CS, genie_info=ids, iterations=3)
        est = next(d for d in dets if d.id == ids[0]).cir_estimates[0]
        pic_err.append(np.mean(np.abs(est - _padded(cirs[0])[0]) ** 2))
    assert np.mean(raw_err) == pytest.approx(1 / N_ZC, rel=0.5)
    assert np.mean(pic_err) < 1e-4
    assert np.mean(pic_err) < np.mean(raw_err) / 10


def test_cross_root_interference_floor():
    # One foreign-root preamble puts beta/N_zc of power in every raw window bin.
    beta = 4.0
    acc = []
    for seed in range(300):
        rng = np.random.default_rng(seed)
        h = draw_cirs(pedestrian_b(), 1, rng, N_CS)
        y, _ = _scene([PreambleId(2, 30)], m=1, beta=beta, cirs=[h], seed=seed)
        window = extract_cir(correlate_root(y[0], 1), 7, N_CS)
        acc.append(np.abs(window * N_ZC) ** 2 / N_ZC**2)
    measured = np.mean(acc)
    assert measured == pytest.approx(beta / N_ZC, rel=0.1)


def test_estimate_channels_single_device_exact():
    rng = np.random.default_rng(10)
    h = draw_cirs(pedestrian_b(), 4, rng, N_CS)
    pid = PreambleId(3, 22)
    y, _ = _scene([pid], m=4, cirs=[h])
    dets = estimate_channels(y, [3], N_CS, genie_info=[pid])
    assert len(dets) == 1
    assert dets[0].id == pid
    np.testing.assert_allclose(dets[0].cir_estimates, _padded(h), atol=1e-12)


def test_estimate_channels_collision_superposes():
    rng = np.random.default_rng(11)
    h_a = draw_cirs(pedestrian_b(), 2, rng, N_CS)
    h_b = draw_cirs(pedestrian_b(), 2, rng, N_CS)
    pid = PreambleId(2, 40)
    y, _ = _scene([pid, pid], m=2, cirs=[h_a, h_b])
    dets = estimate_channels(y, [2], N_CS, genie_info=[pid, pid])
    assert len(dets) == 1
    np.testing.assert_allclose(
        dets[0].cir_estimates, _padded(h_a) + _padded(h_b), atol=1e-12
    )


def test_estimate_channels_noise_level_at_high_snr():
    # Per-bin estimation error approaches sigma^2/(N_zc * beta) for one root.
    beta = 10 ** 2.3
    ids = [PreambleId(1, 10), PreambleId(1, 20), PreambleId(1, 30)]
    errors = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        cirs = [draw_cirs(pedestrian_b(), 2, rng, N_CS) for _ in ids]
        devs = [
            DeviceRealization(pid, np.zeros(1, np.uint8), h)
            for pid, h in zip(ids, cirs)
        ]
        y = compose_prach(devs, 2, N_ZC, N_CS, beta, 1.0, rng)
        dets = estimate_channels(y, [1], N_CS, genie_info=ids, beta=beta)
        for det, h in zip(sorted(dets, key=lambda d: d.id.shift), cirs):
            errors.append(np.mean(np.abs(det.cir_estimates - _padded(h)) ** 2))
    assert np.mean(errors) == pytest.approx(1.0 / (N_ZC * beta), rel=0.1)


def test_estimate_channels_antenna_permutation_equivariance():
    ids = [PreambleId(1, 4), PreambleId(2, 50)]
    rng = np.random.default_rng(12)
    cirs = [draw_cirs(pedestrian_b(), 3, rng, N_CS) for _ in ids]
    y, _ = _scene(ids, m=3, cirs=cirs, sigma2=0.1, seed=13)
    perm = [2, 0, 1]
    dets = estimate_channels(y, [1, 2], N_CS, genie_info=ids)
    dets_perm = estimate_channels(y[perm], [1, 2], N_CS, genie_info=ids)
    for d, dp in zip(dets, dets_perm):
        assert d.id == dp.id
        np.testing.assert_allclose(d.cir_estimates[perm], dp.cir_estimates, atol=1e-10)


def test_estimate_channels_blind_recovers_active_set():
    ids = [PreambleId(1, 10), PreambleId(2, 20), PreambleId(2, 21)]
    rng = np.random.default_rng(14)
    beta = 10 ** 2.3
    cirs = [draw_cirs(pedestrian_b(), 4, rng, N_CS) for _ in ids]
    devs = [DeviceRealization(p, np.zeros(1, np.uint8), h) for p, h in zip(ids, cirs)]
    y = compose_prach(devs, 4, N_ZC, N_CS, beta, 1.0, rng)
    dets = estimate_channels(y, [1, 2], N_CS, mode="blind", beta=beta)
    assert sorted(d.id for d in dets) == sorted(ids)
