"""Zadoff-Chu root sequences, cyclic-shift preambles, and circular correlation
primitives.

All signal vectors are 1-D complex numpy arrays. Root sequences of a prime
length have an ideal periodic auto-correlation (a single peak of height N_zc)
and a constant cross-correlation magnitude of sqrt(N_zc) between distinct
roots, which is what makes them usable both as random-access preambles and as
uplink reference signals.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "PreambleId",
    "zc_sequence",
    "generate_preamble",
    "circular_correlation",
    "circular_convolution",
    "dft_submatrix",
    "is_prime",
]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for d in range(2, math.isqrt(n) + 1):
        if n % d == 0:
            return False
    return True


@dataclass(frozen=True, order=True)
class PreambleId:
    """One of K*N_P preambles: root index r and cyclic-shift index p >= 1."""

    root: int
    shift: int

    def validate(self, n_cs: int, n_zc: int) -> None:
        if not 1 <= self.root <= n_zc - 1:
            raise ValueError(f"root {self.root} outside [1, {n_zc - 1}]")
        if self.shift < 1:
            raise ValueError(f"shift {self.shift} must be >= 1")
        if self.shift * n_cs >= n_zc:
            raise ValueError(
                f"shift*N_cs = {self.shift * n_cs} must stay below N_zc = {n_zc}"
            )


@lru_cache(maxsize=64)
def _zc_cached(root: int, n_zc: int) -> np.ndarray:
    n = np.arange(n_zc)
    seq = np.exp(-1j * np.pi * root * n * (n + 1) / n_zc)
    seq.setflags(write=False)
    return seq


def zc_sequence(root: int, n_zc: int) -> np.ndarray:
    """Length-N_zc Zadoff-Chu sequence z_r[n] = exp(-j*pi*r*n*(n+1)/N_zc).

    N_zc must be prime so that every root in 1..N_zc-1 is coprime with the
    length and the constant cross-correlation property holds.
    """
    if not is_prime(n_zc):
        raise ValueError(f"N_zc = {n_zc} is not prime")
    if not 1 <= root <= n_zc - 1:
        raise ValueError(f"root {root} outside [1, {n_zc - 1}]")
    return _zc_cached(root, n_zc)


def generate_preamble(pid: PreambleId, n_cs: int, n_zc: int) -> np.ndarray:
    """Cyclic-shift preamble x[n] = z_r[(n + p*N_cs) mod N_zc]."""
    pid.validate(n_cs, n_zc)
    return np.roll(zc_sequence(pid.root, n_zc), -pid.shift * n_cs)


@lru_cache(maxsize=8)
def _zc_fft(root: int, n_zc: int) -> np.ndarray:
    out = np.fft.fft(zc_sequence(root, n_zc))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=512)
def _preamble_fft(root: int, shift: int, n_cs: int, n_zc: int) -> np.ndarray:
    # A left cyclic shift by s in time is a +2*pi*f*s/N phase ramp in frequency.
    s = shift * n_cs
    ramp = np.exp(2j * np.pi * s * np.arange(n_zc) / n_zc)
    out = _zc_fft(root, n_zc) * ramp
    out.setflags(write=False)
    return out


@lru_cache(maxsize=8)
def dft_submatrix(rows: int, n: int) -> np.ndarray:
    """First `rows` rows of the n-point DFT matrix: W[l, f] = exp(-2j pi f l / n).

    Multiplying a short kernel by this matrix evaluates its zero-padded DFT
    faster than a full FFT when rows << n.
    """
    grid = np.outer(np.arange(rows), np.arange(n))
    out = np.exp(-2j * np.pi * grid / n)
    out.setflags(write=False)
    return out


def circular_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Circular cross-correlation out[alpha] = sum_n a[n] * conj(b[(n+alpha) mod N]).

    FFT-accelerated; `a` may be a 2-D array of row vectors, correlated row-wise
    against the single sequence `b`.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    if a.shape[-1] == 0:
        raise ValueError("empty input")
    fa = np.fft.fft(a)
    fb = np.fft.fft(b)
    return np.conj(np.fft.ifft(np.conj(fa) * fb))


def circular_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Circular convolution out[n] = sum_l b[l] * a[(n-l) mod N].

    `b` is zero-extended to the length of `a`; it models a short channel
    impulse response applied after cyclic-prefix removal. `b` may be 2-D
    (one response per row), producing one output row per response.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.shape[-1]
    if n == 0 or b.shape[-1] == 0:
        raise ValueError("empty input")
    if b.shape[-1] > n:
        raise ValueError(f"kernel longer than signal: {b.shape[-1]} > {n}")
    return np.fft.ifft(np.fft.fft(a) * np.fft.fft(b, n=n))
