"""Transmit-side composition: preamble selection and superposed multi-device
reception on the PRACH and on the short-packet region (SPT) next to it.

Every device keeps one CIR per base-station antenna for the whole trial; the
same realizations drive both the PRACH and the SPT observation (the two
regions sit inside one coherence interval).
"""

from dataclasses import dataclass

import numpy as np

from .channel import add_awgn, frequency_response
from .decoder import bpsk_modulate
from .sequences import PreambleId, _preamble_fft

__all__ = [
    "DeviceRealization",
    "ReceivedGrid",
    "select_preambles",
    "compose_prach",
    "compose_spt",
]


@dataclass
class DeviceRealization:
    """Ground truth for one device in one trial."""

    preamble: PreambleId
    payload: np.ndarray  # (N_sc,) bits
    cirs: np.ndarray  # (M, L) complex taps, one row per antenna


@dataclass
class ReceivedGrid:
    """Per-antenna observations: time-domain PRACH and frequency-domain SPT."""

    prach: np.ndarray  # (M, N_zc) complex
    spt: np.ndarray  # (M, N_sc) complex


def select_preambles(
    n_i: int, roots, n_p: int, rng: np.random.Generator
) -> list[PreambleId]:
    """N_I independent uniform draws over the K*N_P preamble set.

    Collisions are possible by design; the collision probability of a tagged
    device is 1 - (1 - 1/(K*N_P))^(N_I - 1).
    """
    roots = list(roots)
    if n_i < 1 or len(roots) < 1 or n_p < 1:
        raise ValueError("N_I, K, and N_P must all be >= 1")
    flat = rng.integers(0, len(roots) * n_p, size=n_i)
    return [PreambleId(roots[int(v) // n_p], int(v) % n_p + 1) for v in flat]


def compose_prach(
    devices: list[DeviceRealization],
    m_antennas: int,
    n_zc: int,
    n_cs: int,
    beta: float,
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Superposed PRACH observation y^m[n] = sum_i sqrt(beta) h_mi (*) x_i + w_m.

    The circular convolutions are accumulated in the frequency domain (one
    inverse FFT total). Returns an (M, N_zc) array.
    """
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    for dev in devices:
        if dev.cirs.shape[0] != m_antennas:
            raise ValueError(
                f"device has {dev.cirs.shape[0]} CIRs, expected {m_antennas}"
            )
        if dev.cirs.shape[1] > n_cs:
            raise ValueError("CIR exceeds the cyclic-shift guard window")
        dev.preamble.validate(n_cs, n_zc)
    if not devices:
        return add_awgn(np.zeros((m_antennas, n_zc), dtype=complex), sigma2, rng)
    responses = _stacked_responses(devices, m_antennas, n_zc)
    x_f = np.stack(
        [_preamble_fft(d.preamble.root, d.preamble.shift, n_cs, n_zc) for d in devices]
    )
    y_f = np.einsum("df,dmf->mf", x_f, responses)
    y = np.fft.ifft(np.sqrt(beta) * y_f)
    return add_awgn(y, sigma2, rng)


def _stacked_responses(devices, m_antennas: int, n_sc: int) -> np.ndarray:
    """Frequency responses of every device's CIRs as one (N_dev, M, N_sc) array."""
    length = max(dev.cirs.shape[1] for dev in devices)
    cirs = np.zeros((len(devices) * m_antennas, length), dtype=complex)
    for i, dev in enumerate(devices):
        cirs[i * m_antennas : (i + 1) * m_antennas, : dev.cirs.shape[1]] = dev.cirs
    flat = frequency_response(cirs, n_sc)
    return flat.reshape(len(devices), m_antennas, n_sc)


def compose_spt(
    devices: list[DeviceRealization],
    m_antennas: int,
    n_sc: int,
    beta: float,
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Superposed frequency-domain SPT observation, one BPSK symbol per
    subcarrier: Y^m[f] = sum_i sqrt(beta) H_mi[f] s_i[f] + W.

    Returns an (M, N_sc) array.
    """
    for dev in devices:
        if dev.cirs.shape[0] != m_antennas:
            raise ValueError(
                f"device has {dev.cirs.shape[0]} CIRs, expected {m_antennas}"
            )
        if dev.payload.shape[-1] != n_sc:
            raise ValueError(
                f"payload length {dev.payload.shape[-1]} != N_sc = {n_sc}"
            )
    if not devices:
        return add_awgn(np.zeros((m_antennas, n_sc), dtype=complex), sigma2, rng)
    responses = _stacked_responses(devices, m_antennas, n_sc)
    symbols = bpsk_modulate(np.stack([dev.payload for dev in devices]))
    y = np.sqrt(beta) * np.einsum("df,dmf->mf", symbols, responses)
    return add_awgn(y, sigma2, rng)
