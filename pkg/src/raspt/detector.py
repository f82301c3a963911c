"""Receiver-side PRACH processing: preamble activity detection, per-antenna
channel estimation from circular correlations, and multi-root signal
separation by parallel interference cancellation (PIC).

Correlating the received PRACH against a root sequence concentrates every
same-root preamble's channel into a disjoint N_cs-long lag window anchored at
p*N_cs, while preambles of other roots raise a flat noise-like floor (constant
cross-correlation). The PIC loop reconstructs each root's contribution from
its current channel estimates and subtracts it from the other roots'
observations, iteratively shrinking that floor.

The pipeline runs in the frequency domain internally (cached root/preamble
DFTs, one inverse FFT per root and round); the public operations keep their
time-domain contracts. Channel estimates are normalized to true tap units:
the raw correlation window is divided by N_zc * sqrt(beta).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sequences import (
    PreambleId,
    _preamble_fft,
    _zc_fft,
    circular_convolution,
    circular_correlation,
    dft_submatrix,
    generate_preamble,
    zc_sequence,
)

__all__ = [
    "CorrelationProfile",
    "DetectedPreamble",
    "correlate_root",
    "extract_cir",
    "detect_active",
    "reconstruct_root_signal",
    "separate_roots",
    "estimate_channels",
]


@dataclass
class CorrelationProfile:
    """All-lag correlation of one antenna's PRACH against one root sequence."""

    values: np.ndarray  # (N_zc,) complex
    root: int
    antenna: int = 0


@dataclass
class DetectedPreamble:
    """One detected (root, shift) pair with its per-antenna channel estimates."""

    id: PreambleId
    cir_estimates: np.ndarray  # (M, N_cs) complex, true-tap units
    peak_metric: float  # antenna-combined raw window energy


def correlate_root(y: np.ndarray, root: int, antenna: int = 0) -> CorrelationProfile:
    """Correlation profile c[alpha] = sum_n y[n] * conj(z_root[(n+alpha) mod N])."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("correlate_root expects a single antenna's sequence")
    z = zc_sequence(root, y.shape[-1])
    return CorrelationProfile(circular_correlation(y, z), root, antenna)


@lru_cache(maxsize=8)
def _window_index_matrix(n_cs: int, n_zc: int, n_shifts: int) -> np.ndarray:
    # Desired-signal term of the correlation lands at alpha = p*N_cs - l.
    shifts = np.arange(1, n_shifts + 1)[:, None] * n_cs
    idx = (shifts - np.arange(n_cs)[None, :]) % n_zc
    idx.setflags(write=False)
    return idx


def extract_cir(profile: CorrelationProfile, p: int, n_cs: int) -> np.ndarray:
    """Window read-out h_hat[l] = c[(p*N_cs - l) mod N_zc] / N_zc."""
    if p < 1:
        raise ValueError("shift index p must be >= 1")
    values = profile.values
    n_zc = values.shape[-1]
    idx = (p * n_cs - np.arange(n_cs)) % n_zc
    return values[idx] / n_zc


def detect_active(
    profiles: list,
    threshold_factor: float,
    n_cs: int,
    n_shifts: int | None = None,
) -> list[int]:
    """Shift indices whose antenna-combined window energy exceeds
    threshold_factor times the median window energy."""
    if len(profiles) == 0:
        raise ValueError("need at least one antenna profile")
    if threshold_factor <= 0:
        raise ValueError("threshold_factor must be positive")
    corr = np.stack([p.values for p in profiles])
    n_zc = corr.shape[-1]
    if n_shifts is None:
        n_shifts = (n_zc - 1) // n_cs
    energies = _window_energies(corr, n_cs, n_shifts)
    threshold = threshold_factor * np.median(energies)
    return [int(p) for p in np.nonzero(energies > threshold)[0] + 1]


def _window_energies(corr: np.ndarray, n_cs: int, n_shifts: int) -> np.ndarray:
    """Antenna-combined raw energy of each shift window; corr is (M, N_zc)."""
    idx = _window_index_matrix(n_cs, corr.shape[-1], n_shifts)
    return np.sum(np.abs(corr[:, idx]) ** 2, axis=(0, 2))


def reconstruct_root_signal(
    detections: list, beta: float, n_zc: int, n_cs: int
) -> np.ndarray:
    """Rebuild one root's noiseless PRACH contribution from channel estimates.

    Returns the (M, N_zc) superposition sqrt(beta) * x_d (*) h_hat_d over all
    detections (which must share one root).
    """
    if len(detections) == 0:
        raise ValueError("cannot infer antenna count from zero detections")
    roots = {d.id.root for d in detections}
    if len(roots) != 1:
        raise ValueError(f"detections span several roots: {sorted(roots)}")
    return np.fft.ifft(_reconstruct_freq(detections, beta, n_zc, n_cs))


def _reconstruct_freq(detections, beta, n_zc, n_cs) -> np.ndarray:
    """Frequency-domain root reconstruction sum_d sqrt(beta) X_d[f] H_hat_d[f]."""
    m_antennas = detections[0].cir_estimates.shape[0]
    out = np.zeros((m_antennas, n_zc), dtype=complex)
    window_dft = dft_submatrix(n_cs, n_zc)
    for det in detections:
        x_f = _preamble_fft(det.id.root, det.id.shift, n_cs, n_zc)
        out += x_f * (det.cir_estimates @ window_dft)
    return np.sqrt(beta) * out


def _detect_extract_freq(
    residual_f: np.ndarray,
    root: int,
    n_cs: int,
    n_shifts: int,
    mode: str,
    genie_shifts: dict,
    beta: float,
    threshold_factor: float,
) -> list[DetectedPreamble]:
    """Correlate one root against an (M, N_zc) spectrum and estimate the
    channel of every active shift."""
    n_zc = residual_f.shape[-1]
    corr = np.conj(np.fft.ifft(np.conj(residual_f) * _zc_fft(root, n_zc)))
    if mode == "genie":
        shifts = genie_shifts.get(root, ())
    else:
        energies = _window_energies(corr, n_cs, n_shifts)
        threshold = threshold_factor * np.median(energies)
        shifts = [int(p) for p in np.nonzero(energies > threshold)[0] + 1]
    idx = _window_index_matrix(n_cs, n_zc, n_shifts)
    detections = []
    scale = n_zc * np.sqrt(beta)
    for p in shifts:
        window = corr[:, idx[p - 1]]
        energy = float(np.sum(np.abs(window) ** 2))
        detections.append(DetectedPreamble(PreambleId(root, p), window / scale, energy))
    return detections


def _genie_shifts_by_root(genie_info) -> dict:
    table = {}
    for pid in genie_info:
        table.setdefault(pid.root, set()).add(pid.shift)
    return {root: tuple(sorted(shifts)) for root, shifts in table.items()}


def _pic_reconstructions(
    y_f: np.ndarray,
    roots: list,
    n_cs: int,
    iterations: int,
    mode: str,
    genie_shifts: dict,
    beta: float,
    threshold_factor: float,
    n_shifts: int,
) -> np.ndarray:
    """Iterate PIC rounds; returns frequency-domain reconstructions (K, M, N_zc).

    Every round re-estimates each root from the observation minus the other
    roots' previous reconstructions; all reconstructions update at once.
    """
    n_zc = y_f.shape[-1]
    recon_f = np.zeros((len(roots),) + y_f.shape, dtype=complex)
    # Roots the genie knows to be silent keep a zero reconstruction; skipping
    # them changes nothing but saves their per-round transforms. With at most
    # one active root the first round is already the fixed point (a root's own
    # reconstruction is never subtracted from its residual).
    active = [
        ki for ki, root in enumerate(roots)
        if mode == "blind" or genie_shifts.get(root, ())
    ]
    if len(active) <= 1:
        iterations = 1
    for _ in range(iterations):
        total_f = recon_f.sum(axis=0)
        new_recon = np.zeros_like(recon_f)
        for ki in active:
            residual_f = y_f - (total_f - recon_f[ki])
            dets = _detect_extract_freq(
                residual_f, roots[ki], n_cs, n_shifts, mode, genie_shifts, beta,
                threshold_factor,
            )
            if dets:
                new_recon[ki] = _reconstruct_freq(dets, beta, n_zc, n_cs)
        recon_f = new_recon
    return recon_f


def _validate_separation_args(roots, iterations, mode, genie_info, beta):
    if iterations < 1 or len(roots) < 1:
        raise ValueError("need iterations >= 1 and at least one root")
    if mode not in ("genie", "blind"):
        raise ValueError(f"unknown detector mode: {mode!r}")
    if mode == "genie" and genie_info is None:
        raise ValueError("genie mode requires the active-preamble list")
    if beta <= 0:
        raise ValueError("beta must be positive")


def separate_roots(
    y: np.ndarray,
    roots,
    n_cs: int,
    iterations: int = 3,
    mode: str = "genie",
    genie_info=None,
    beta: float = 1.0,
    threshold_factor: float = 10.0,
    n_shifts: int | None = None,
) -> list[np.ndarray]:
    """Split the (M, N_zc) PRACH observation into one signal per root.

    Each returned per-root signal is y minus the other roots' final PIC
    reconstructions; with a single root it is y itself.
    """
    y = np.asarray(y)
    roots = list(roots)
    _validate_separation_args(roots, iterations, mode, genie_info, beta)
    if len(roots) == 1:
        return [y]
    n_zc = y.shape[-1]
    if n_shifts is None:
        n_shifts = (n_zc - 1) // n_cs
    genie_shifts = _genie_shifts_by_root(genie_info) if mode == "genie" else {}
    y_f = np.fft.fft(y)
    recon_f = _pic_reconstructions(
        y_f, roots, n_cs, iterations, mode, genie_shifts, beta,
        threshold_factor, n_shifts,
    )
    total_f = recon_f.sum(axis=0)
    return [
        np.fft.ifft(y_f - (total_f - recon_f[ki])) for ki in range(len(roots))
    ]


def estimate_channels(
    y: np.ndarray,
    roots,
    n_cs: int,
    mode: str = "genie",
    genie_info=None,
    iterations: int = 3,
    beta: float = 1.0,
    threshold_factor: float = 10.0,
    n_shifts: int | None = None,
) -> list[DetectedPreamble]:
    """Full estimation pipeline: separate roots, then per root correlate,
    detect active shifts (or take the genie list), and extract per-antenna
    channel estimates.

    Colliding devices share a (root, shift) pair and yield a single detection
    whose window holds their superposed channel.
    """
    y = np.asarray(y)
    roots = list(roots)
    _validate_separation_args(roots, iterations, mode, genie_info, beta)
    n_zc = y.shape[-1]
    if n_shifts is None:
        n_shifts = (n_zc - 1) // n_cs
    genie_shifts = _genie_shifts_by_root(genie_info) if mode == "genie" else {}
    y_f = np.fft.fft(y)
    active_count = (
        sum(1 for root in roots if genie_shifts.get(root, ()))
        if mode == "genie" else len(roots)
    )
    if len(roots) == 1 or active_count <= 1:
        # Nothing to cancel: every root sees the raw observation.
        residuals_f = [y_f] * len(roots)
    else:
        recon_f = _pic_reconstructions(
            y_f, roots, n_cs, iterations, mode, genie_shifts, beta,
            threshold_factor, n_shifts,
        )
        total_f = recon_f.sum(axis=0)
        residuals_f = [y_f - (total_f - recon_f[ki]) for ki in range(len(roots))]
    detections = []
    for root, residual_f in zip(roots, residuals_f):
        if mode == "genie" and not genie_shifts.get(root, ()):
            continue
        detections.extend(
            _detect_extract_freq(
                residual_f, root, n_cs, n_shifts, mode, genie_shifts, beta,
                threshold_factor,
            )
        )
    return detections
