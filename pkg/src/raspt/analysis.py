"""Metric formulas and Monte Carlo aggregation.

Empirical estimators follow fixed scoring rules:

* channel-estimation MSE averages |h - h_hat|^2 per correlation bin over the
  N_cs estimation window, then over antennas, devices, and trials; collided
  devices are excluded (their window holds a superposition of channels);
* BER counts bit mismatches only in trials with zero preamble collisions
  (and, under blind detection, complete detection), over decoded bits;
* a device attempt succeeds iff its preamble was unique and its packet
  decoded with zero bit errors.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricEstimate",
    "TrialAccumulator",
    "METRIC_NAMES",
    "mse",
    "ber",
    "analytical_collision_prob",
    "success_prob",
    "offered_load",
    "deterioration_threshold",
    "latency_budget",
    "aggregate_metrics",
]

# Fixed CSV metric names, in output order.
METRIC_NAMES = ("mse", "ber", "p_c_emp", "p_c_ana", "p_s_emp", "p_s_ana")

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class MetricEstimate:
    name: str
    value: float
    count: int
    ci_halfwidth: float


def mse(h_true: np.ndarray, h_est: np.ndarray) -> float:
    """Per-bin squared estimation error over the N_cs window.

    `h_true` (length <= N_cs) is zero-padded to the window length of `h_est`.
    """
    h_true = np.asarray(h_true)
    h_est = np.asarray(h_est)
    n_cs = h_est.shape[-1]
    if h_true.shape[-1] > n_cs:
        raise ValueError("true CIR longer than the estimation window")
    padded = np.zeros(n_cs, dtype=complex)
    padded[: h_true.shape[-1]] = h_true
    return float(np.mean(np.abs(padded - h_est) ** 2))


def ber(tx: np.ndarray, rx: np.ndarray) -> float:
    """Fraction of mismatched bit positions."""
    tx = np.asarray(tx)
    rx = np.asarray(rx)
    if tx.shape != rx.shape:
        raise ValueError(f"length mismatch: {tx.shape} vs {rx.shape}")
    if tx.size == 0:
        raise ValueError("empty bit vectors")
    return float(np.mean(tx != rx))


def analytical_collision_prob(k: int, n_p: int, n_i: int) -> float:
    """p_c = 1 - (1 - 1/(K*N_P))^(N_I - 1)."""
    if k * n_p < 1 or n_i < 1:
        raise ValueError("K*N_P and N_I must be >= 1")
    return 1.0 - (1.0 - 1.0 / (k * n_p)) ** (n_i - 1)


def success_prob(p_c: float, p_b: float, n_i: int, m: int) -> float:
    """p_s = (1 - p_c)(1 - p_b) when N_I <= M, zero otherwise."""
    if not (0.0 <= p_c <= 1.0 and 0.0 <= p_b <= 1.0):
        raise ValueError("p_c and p_b must lie in [0, 1]")
    if n_i > m:
        return 0.0
    return (1.0 - p_c) * (1.0 - p_b)


def offered_load(n: float, lam: float, t_p: float, p_c: float) -> float:
    """Per-slot load N*lambda*T_P/(1 - p_c) under Poisson arrivals with backlog."""
    if p_c >= 1.0:
        raise ValueError("p_c must be < 1")
    return n * lam * t_p / (1.0 - p_c)


def deterioration_threshold(k: int, n_p: int) -> float:
    """Device count beyond which random-access throughput starts to degrade."""
    if k * n_p < 2:
        raise ValueError("K*N_P must be >= 2")
    return -1.0 / math.log(1.0 - 1.0 / (k * n_p))


def latency_budget() -> list:
    """Per-phase latency of one access cycle, in milliseconds (6 ms total)."""
    return [
        ("preamble_transmission", 1.0),
        ("short_packet_transmission", 1.0),
        ("enodeb_processing", 3.0),
        ("acknowledgement", 1.0),
    ]


@dataclass
class TrialAccumulator:
    """Mergeable per-trial statistics; partial aggregates combine by addition."""

    trials: int = 0
    attempts: int = 0
    collided: int = 0
    successes: int = 0
    mse_sum: float = 0.0
    mse_sq_sum: float = 0.0
    mse_count: int = 0
    ber_errors: int = 0
    ber_bits: int = 0

    def add_record(self, record: np.ndarray) -> None:
        self.trials += 1
        self.attempts += int(record[0])
        self.collided += int(record[1])
        self.successes += int(record[2])
        self.mse_sum += float(record[3])
        self.mse_sq_sum += float(record[4])
        self.mse_count += int(record[5])
        self.ber_errors += int(record[6])
        self.ber_bits += int(record[7])

    def merge(self, other: "TrialAccumulator") -> "TrialAccumulator":
        return TrialAccumulator(
            trials=self.trials + other.trials,
            attempts=self.attempts + other.attempts,
            collided=self.collided + other.collided,
            successes=self.successes + other.successes,
            mse_sum=self.mse_sum + other.mse_sum,
            mse_sq_sum=self.mse_sq_sum + other.mse_sq_sum,
            mse_count=self.mse_count + other.mse_count,
            ber_errors=self.ber_errors + other.ber_errors,
            ber_bits=self.ber_bits + other.ber_bits,
        )

    @classmethod
    def from_records(cls, records: np.ndarray) -> "TrialAccumulator":
        """Reduce a (trials, 8) record array; summation order is fixed by the
        array layout, so the result is independent of how trials were scheduled."""
        records = np.asarray(records)
        return cls(
            trials=records.shape[0],
            attempts=int(np.sum(records[:, 0])),
            collided=int(np.sum(records[:, 1])),
            successes=int(np.sum(records[:, 2])),
            mse_sum=float(np.sum(records[:, 3])),
            mse_sq_sum=float(np.sum(records[:, 4])),
            mse_count=int(np.sum(records[:, 5])),
            ber_errors=int(np.sum(records[:, 6])),
            ber_bits=int(np.sum(records[:, 7])),
        )


def _binomial_estimate(name: str, hits: int, n: int) -> MetricEstimate:
    if n <= 0:
        return MetricEstimate(name, float("nan"), 0, float("nan"))
    p = hits / n
    hw = _Z95 * math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return MetricEstimate(name, p, n, hw)


def aggregate_metrics(
    acc: TrialAccumulator, k: int, n_p: int, n_i: int, m: int
) -> dict:
    """Assemble the fixed metric set from one scenario's accumulator."""
    out = {}
    if acc.mse_count > 0:
        mean = acc.mse_sum / acc.mse_count
        var = max(acc.mse_sq_sum / acc.mse_count - mean * mean, 0.0)
        hw = _Z95 * math.sqrt(var / acc.mse_count)
        out["mse"] = MetricEstimate("mse", mean, acc.mse_count, hw)
    else:
        out["mse"] = MetricEstimate("mse", float("nan"), 0, float("nan"))
    out["ber"] = _binomial_estimate("ber", acc.ber_errors, acc.ber_bits)
    out["p_c_emp"] = _binomial_estimate("p_c_emp", acc.collided, acc.attempts)
    out["p_s_emp"] = _binomial_estimate("p_s_emp", acc.successes, acc.attempts)
    p_c_ana = analytical_collision_prob(k, n_p, n_i)
    out["p_c_ana"] = MetricEstimate("p_c_ana", p_c_ana, 1, 0.0)
    p_b = out["ber"].value if acc.ber_bits > 0 else 0.0
    out["p_s_ana"] = MetricEstimate(
        "p_s_ana", success_prob(p_c_ana, p_b, n_i, m), 1, 0.0
    )
    return out
