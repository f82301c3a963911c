"""Short-packet demodulation: per-subcarrier zero-forcing multi-user detection
with BPSK slicing.

One mixing matrix is built per subcarrier from the detected preambles'
estimated frequency responses; a QR least-squares solve separates the streams.
Decoding fails slot-wide when the mixing matrix cannot be full column rank
(more active preambles than antennas, or a rank-deficient subcarrier).
"""

from dataclasses import dataclass

import numpy as np

from .channel import frequency_response

__all__ = [
    "RankDeficientError",
    "ZfDecodeResult",
    "bpsk_modulate",
    "bpsk_demodulate",
    "solve_least_squares",
    "zf_decode",
]


class RankDeficientError(ArithmeticError):
    """Mixing matrix numerically rank-deficient; zero-forcing undefined."""


def bpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Bit 0 -> +1, bit 1 -> -1."""
    return (1.0 - 2.0 * np.asarray(bits)).astype(complex)


def bpsk_demodulate(symbols: np.ndarray) -> np.ndarray:
    """Hard slice on the real part; inverse of bpsk_modulate in the noise-free case."""
    return (np.real(symbols) < 0).astype(np.uint8)


def solve_least_squares(
    A: np.ndarray, b: np.ndarray, rank_tol: float = 1e-9
) -> np.ndarray:
    """Minimize ||A x - b||_2 for a tall complex system via QR.

    Raises RankDeficientError when the smallest pivot magnitude of R falls
    below rank_tol times the largest.
    """
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    m, n = A.shape
    if not m >= n >= 1:
        raise ValueError(f"need M >= N >= 1, got shape {A.shape}")
    q, r = np.linalg.qr(A)
    pivots = np.abs(np.diagonal(r))
    if pivots.min() < rank_tol * pivots.max():
        raise RankDeficientError(
            f"pivot ratio {pivots.min() / pivots.max():.3e} below rank_tol {rank_tol:.1e}"
        )
    return np.linalg.solve(r, q.conj().T @ b)


@dataclass
class ZfDecodeResult:
    bits: np.ndarray  # (N_act, N_sc) hard decisions, zeros where failed
    soft: np.ndarray  # (N_act, N_sc) post-ZF soft symbols, zeros where failed
    failed: np.ndarray  # (N_act,) bool, True when the slot's ZF was infeasible


def zf_decode(
    spt: np.ndarray,
    detections: list,
    beta: float,
    rank_tol: float = 1e-9,
) -> ZfDecodeResult:
    """Zero-forcing separation of all detected streams across the SPT band.

    `spt` is the (M, N_sc) frequency-domain observation; each detection
    contributes one mixing column sqrt(beta) * FFT(cir_estimates) per
    subcarrier. All streams are flagged failed when the full-rank condition
    cannot hold (N_act > M) or any subcarrier matrix is rank-deficient.
    """
    if len(detections) == 0:
        raise ValueError("detections must be nonempty")
    m_antennas, n_sc = spt.shape
    n_act = len(detections)
    bits = np.zeros((n_act, n_sc), dtype=np.uint8)
    soft = np.zeros((n_act, n_sc), dtype=complex)
    if n_act > m_antennas:
        return ZfDecodeResult(bits, soft, np.ones(n_act, dtype=bool))

    # One fused transform for every detection, then a (N_sc, M, N_act) view.
    windows = np.concatenate([np.sqrt(beta) * d.cir_estimates for d in detections])
    responses = frequency_response(windows, n_sc).reshape(n_act, m_antennas, n_sc)
    mixing = responses.transpose(2, 1, 0)
    q, r = np.linalg.qr(mixing)
    pivots = np.abs(np.diagonal(r, axis1=1, axis2=2))
    if np.any(pivots.min(axis=1) < rank_tol * pivots.max(axis=1)):
        return ZfDecodeResult(bits, soft, np.ones(n_act, dtype=bool))

    # (Q^H b)_n = conj(sum_m q_mn conj(b_m)): conjugate the small factors only.
    rhs = np.conj(np.conj(spt.T)[:, None, :] @ q)[:, 0, :, None]
    x = np.linalg.solve(r, rhs)[..., 0]  # (N_sc, N_act)
    soft = x.T
    bits = bpsk_demodulate(soft)
    return ZfDecodeResult(bits, soft, np.zeros(n_act, dtype=bool))
