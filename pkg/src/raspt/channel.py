"""Multipath channel realization (ITU Pedestrian B), channel application, and
noise injection.

A channel impulse response (CIR) is a short 1-D complex array of tap gains on
the PRACH sample grid. Taps are drawn as independent circularly symmetric
complex Gaussians whose variances follow the normalized power-delay profile,
so the total expected channel power is 1; open-loop power control is then
modeled by a single linear gain beta with unit noise variance.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sequences import circular_convolution, dft_submatrix

__all__ = [
    "ChannelProfile",
    "PEDESTRIAN_B_DELAYS_NS",
    "PEDESTRIAN_B_POWERS_DB",
    "PRACH_SAMPLE_PERIOD_S",
    "pedestrian_b",
    "draw_cir",
    "draw_cirs",
    "apply_channel",
    "add_awgn",
    "frequency_response",
]

# ITU-R M.1225 Pedestrian B power-delay profile.
PEDESTRIAN_B_DELAYS_NS = (0.0, 200.0, 800.0, 1200.0, 2300.0, 3700.0)
PEDESTRIAN_B_POWERS_DB = (0.0, -0.9, -4.9, -8.0, -7.8, -23.9)

# PRACH numerology: 839 samples over an 800 us sequence (1.25 kHz spacing).
PRACH_SAMPLE_PERIOD_S = 800e-6 / 839


@dataclass(frozen=True)
class ChannelProfile:
    """Tapped-delay-line profile: delays in ns, average powers in dB."""

    tap_delays_ns: tuple = PEDESTRIAN_B_DELAYS_NS
    tap_powers_db: tuple = PEDESTRIAN_B_POWERS_DB
    sample_period_s: float = PRACH_SAMPLE_PERIOD_S

    def __post_init__(self):
        object.__setattr__(self, "tap_delays_ns", tuple(self.tap_delays_ns))
        object.__setattr__(self, "tap_powers_db", tuple(self.tap_powers_db))
        delays = np.asarray(self.tap_delays_ns, dtype=float)
        powers = np.asarray(self.tap_powers_db, dtype=float)
        if delays.size == 0 or delays.size != powers.size:
            raise ValueError(
                "tap_delays_ns and tap_powers_db must be equal-length, non-empty"
            )
        if np.any(delays < 0) or np.any(np.diff(delays) <= 0):
            raise ValueError("tap_delays_ns must be non-negative and strictly increasing")
        if self.sample_period_s <= 0:
            raise ValueError("sample_period_s must be positive")

    def bins(self) -> np.ndarray:
        """Sample bin of each tap (nearest-integer rounding of delay/period)."""
        delays_s = np.asarray(self.tap_delays_ns, dtype=float) * 1e-9
        return np.rint(delays_s / self.sample_period_s).astype(int)

    def bin_powers(self) -> np.ndarray:
        """Normalized linear power per sample bin; sums to 1 over L bins."""
        linear = 10.0 ** (np.asarray(self.tap_powers_db, dtype=float) / 10.0)
        bins = self.bins()
        out = np.zeros(bins.max() + 1)
        np.add.at(out, bins, linear)
        return out / out.sum()

    @property
    def num_bins(self) -> int:
        return int(self.bins().max()) + 1


def pedestrian_b(sample_period_s: float = PRACH_SAMPLE_PERIOD_S) -> ChannelProfile:
    return ChannelProfile(
        PEDESTRIAN_B_DELAYS_NS, PEDESTRIAN_B_POWERS_DB, sample_period_s
    )


@lru_cache(maxsize=16)
def _cached_bin_powers(profile: ChannelProfile) -> np.ndarray:
    powers = profile.bin_powers()
    powers.setflags(write=False)
    return powers


def draw_cir(
    profile: ChannelProfile, rng: np.random.Generator, n_cs: int | None = None
) -> np.ndarray:
    """Draw one CIR realization: length-L complex taps, E[sum |h|^2] = 1.

    Taps falling into the same sample bin add as independent Gaussians. When
    `n_cs` is given, a delay spread exceeding the cyclic-shift guard window
    is rejected.
    """
    return draw_cirs(profile, 1, rng, n_cs)[0]


def draw_cirs(
    profile: ChannelProfile,
    count: int,
    rng: np.random.Generator,
    n_cs: int | None = None,
) -> np.ndarray:
    """Draw `count` independent CIRs at once; returns a (count, L) array."""
    powers = _cached_bin_powers(profile)
    length = powers.size
    if n_cs is not None and length > n_cs:
        raise ValueError(
            f"delay spread of {length} bins exceeds cyclic-shift guard N_cs = {n_cs}"
        )
    g = rng.standard_normal((count, length, 2))
    return np.sqrt(powers / 2.0) * (g[..., 0] + 1j * g[..., 1])


def apply_channel(x: np.ndarray, h: np.ndarray, beta: float) -> np.ndarray:
    """Propagate x through CIR h at linear receive power beta."""
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    if np.ndim(h) and np.shape(h)[-1] > np.shape(x)[-1]:
        raise ValueError("CIR longer than the signal")
    return np.sqrt(beta) * circular_convolution(x, h)


def add_awgn(x: np.ndarray, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """x plus i.i.d. CN(0, sigma2) noise (variance split evenly per quadrature)."""
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be non-negative, got {sigma2}")
    if sigma2 == 0:
        return x
    w = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    return x + np.sqrt(sigma2 / 2.0) * w


def frequency_response(h: np.ndarray, n_sc: int) -> np.ndarray:
    """Per-subcarrier response H[f] = sum_l h[l] exp(-j 2 pi f l / N_sc).

    `h` may be 2-D (one CIR per row); rows transform independently. CIRs here
    are a handful of taps, so the zero-padded DFT is evaluated against a
    cached partial DFT matrix instead of a full FFT.
    """
    h = np.asarray(h)
    if h.shape[-1] > n_sc:
        raise ValueError("CIR longer than the subcarrier grid")
    return h @ dft_submatrix(h.shape[-1], n_sc)
