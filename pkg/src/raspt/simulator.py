"""Monte Carlo engine: scenario configuration, per-trial orchestration, and
campaign aggregation.

Every trial is a pure function of (seed, trial_index): all randomness flows
through counter-derived substreams, so outcomes are independent of worker
scheduling, and campaigns reduce per-trial records in trial order to make
results byte-identical for any degree of parallelism.
"""

import hashlib
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None

_blas_limiter = None


def _pin_blas_single_thread():
    """Keep BLAS pools single-threaded; parallelism happens across trials."""
    global _blas_limiter
    if threadpool_limits is not None and _blas_limiter is None:
        _blas_limiter = threadpool_limits(limits=1)

from .analysis import TrialAccumulator, aggregate_metrics
from .channel import ChannelProfile, draw_cirs, pedestrian_b
from .decoder import zf_decode
from .detector import estimate_channels
from .sequences import is_prime
from .uplink import DeviceRealization, ReceivedGrid, compose_prach, compose_spt, select_preambles

__all__ = [
    "ScenarioConfig",
    "TrialOutcome",
    "CampaignResult",
    "derive_stream",
    "run_trial",
    "run_campaign",
]

RECORD_WIDTH = 8  # attempts, collided, successes, mse_sum, mse_sq, mse_n, errs, bits


@dataclass(frozen=True)
class ScenarioConfig:
    """All knobs of one simulated random-access slot scenario."""

    M: int = 8
    N_I: int = 1
    K: int = 1
    roots: tuple = None
    N_P: int = 64
    N_cs: int = 13
    N_zc: int = 839
    N_sc: int = 839
    snr_db: float = 23.0
    detector_mode: str = "genie"
    pic_iterations: int = 3
    threshold_factor: float = 10.0
    trials: int = 1000
    seed: int = 1
    channel_profile: ChannelProfile = field(default_factory=pedestrian_b)

    def __post_init__(self):
        if self.roots is None:
            object.__setattr__(self, "roots", tuple(range(1, self.K + 1)))
        else:
            object.__setattr__(self, "roots", tuple(int(r) for r in self.roots))
        for key in ("M", "N_I", "K", "N_P", "N_cs", "N_sc", "pic_iterations", "trials"):
            if int(getattr(self, key)) < 1:
                raise ValueError(f"{key}: must be >= 1, got {getattr(self, key)}")
        if not is_prime(self.N_zc):
            raise ValueError(f"N_zc: must be prime, got {self.N_zc}")
        if self.N_P * self.N_cs >= self.N_zc:
            raise ValueError(
                f"N_P: N_P*N_cs = {self.N_P * self.N_cs} must stay below N_zc = {self.N_zc}"
            )
        if len(self.roots) != self.K:
            raise ValueError(f"roots: expected {self.K} entries, got {len(self.roots)}")
        if len(set(self.roots)) != self.K:
            raise ValueError(f"roots: must be distinct, got {self.roots}")
        if not all(1 <= r <= self.N_zc - 1 for r in self.roots):
            raise ValueError(f"roots: each must lie in [1, {self.N_zc - 1}]")
        if self.detector_mode not in ("genie", "blind"):
            raise ValueError(
                f"detector_mode: must be 'genie' or 'blind', got {self.detector_mode!r}"
            )
        if self.threshold_factor <= 0:
            raise ValueError(f"threshold_factor: must be positive, got {self.threshold_factor}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed: must fit in 64 bits, got {self.seed}")
        if self.channel_profile.num_bins > self.N_cs:
            raise ValueError(
                f"channel_profile: delay spread of {self.channel_profile.num_bins} bins "
                f"exceeds N_cs = {self.N_cs}"
            )

    @property
    def beta(self) -> float:
        """Linear receive power under open-loop power control (sigma^2 = 1)."""
        return 10.0 ** (self.snr_db / 10.0)


@dataclass
class TrialOutcome:
    """Ground-truth-vs-decoded record of one trial."""

    collided: np.ndarray  # (N_I,) bool
    detected: np.ndarray  # (N_I,) bool
    decoded: np.ndarray  # (N_I,) bool
    bit_errors: np.ndarray  # (N_I,) int, counted where decoded
    success: np.ndarray  # (N_I,) bool
    mse: np.ndarray  # (N_I, M) float, NaN where no estimate is attributable
    any_collision: bool


@dataclass
class CampaignResult:
    config: ScenarioConfig
    metrics: dict  # metric name -> MetricEstimate


def derive_stream(seed: int, trial_index: int, substream: str) -> np.random.Generator:
    """Independent, run-stable random stream for one (trial, purpose) pair."""
    label = int.from_bytes(hashlib.sha256(substream.encode()).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial_index), label]))


def run_trial(config: ScenarioConfig, trial_index: int) -> TrialOutcome:
    """Simulate one random-access slot end to end and score it."""
    m, n_i = config.M, config.N_I
    beta = config.beta

    ids = select_preambles(
        n_i, config.roots, config.N_P, derive_stream(config.seed, trial_index, "preamble")
    )
    payloads = derive_stream(config.seed, trial_index, "payload").integers(
        0, 2, size=(n_i, config.N_sc), dtype=np.uint8
    )
    rng_ch = derive_stream(config.seed, trial_index, "channel")
    devices = [
        DeviceRealization(
            preamble=ids[i],
            payload=payloads[i],
            cirs=draw_cirs(config.channel_profile, m, rng_ch, config.N_cs),
        )
        for i in range(n_i)
    ]

    grid = ReceivedGrid(
        prach=compose_prach(
            devices, m, config.N_zc, config.N_cs, beta, 1.0,
            derive_stream(config.seed, trial_index, "prach_noise"),
        ),
        spt=compose_spt(
            devices, m, config.N_sc, beta, 1.0,
            derive_stream(config.seed, trial_index, "spt_noise"),
        ),
    )

    detections = estimate_channels(
        grid.prach,
        config.roots,
        config.N_cs,
        mode=config.detector_mode,
        genie_info=ids if config.detector_mode == "genie" else None,
        iterations=config.pic_iterations,
        beta=beta,
        threshold_factor=config.threshold_factor,
        n_shifts=config.N_P,
    )
    decode = zf_decode(grid.spt, detections, beta) if detections else None
    return _score_trial(devices, detections, decode, m, config.N_cs)


def _score_trial(devices, detections, decode, m, n_cs) -> TrialOutcome:
    n_i = len(devices)
    id_counts = Counter(dev.preamble for dev in devices)
    det_index = {det.id: j for j, det in enumerate(detections)}

    collided = np.array([id_counts[dev.preamble] > 1 for dev in devices])
    detected = np.array([dev.preamble in det_index for dev in devices])
    decoded = np.zeros(n_i, dtype=bool)
    bit_errors = np.zeros(n_i, dtype=int)
    mse_matrix = np.full((n_i, m), np.nan)

    for i, dev in enumerate(devices):
        if not detected[i]:
            continue
        j = det_index[dev.preamble]
        if not collided[i]:
            est = detections[j].cir_estimates
            padded = np.zeros((m, n_cs), dtype=complex)
            padded[:, : dev.cirs.shape[1]] = dev.cirs
            mse_matrix[i] = np.mean(np.abs(padded - est) ** 2, axis=1)
            if decode is not None and not decode.failed[j]:
                decoded[i] = True
                bit_errors[i] = int(np.sum(decode.bits[j] != dev.payload))

    success = decoded & (bit_errors == 0)
    return TrialOutcome(
        collided=collided,
        detected=detected,
        decoded=decoded,
        bit_errors=bit_errors,
        success=success,
        mse=mse_matrix,
        any_collision=bool(collided.any()),
    )


def trial_record(outcome: TrialOutcome, mode: str, n_sc: int) -> np.ndarray:
    """Reduce one outcome to the fixed-width aggregation record."""
    valid_mse = outcome.mse[~np.isnan(outcome.mse)]
    ber_eligible = not outcome.any_collision and (
        mode == "genie" or bool(outcome.detected.all())
    )
    errs = int(outcome.bit_errors[outcome.decoded].sum()) if ber_eligible else 0
    bits = int(outcome.decoded.sum()) * n_sc if ber_eligible else 0
    return np.array(
        [
            len(outcome.collided),
            int(outcome.collided.sum()),
            int(outcome.success.sum()),
            float(valid_mse.sum()),
            float(np.sum(valid_mse**2)),
            valid_mse.size,
            errs,
            bits,
        ],
        dtype=np.float64,
    )


def _record_chunk(config: ScenarioConfig, start: int, stop: int) -> np.ndarray:
    out = np.empty((stop - start, RECORD_WIDTH))
    for t in range(start, stop):
        out[t - start] = trial_record(run_trial(config, t), config.detector_mode, config.N_sc)
    return out


def _scenario_records(config: ScenarioConfig, executor, workers: int) -> np.ndarray:
    records = np.empty((config.trials, RECORD_WIDTH))
    if executor is None:
        records[:] = _record_chunk(config, 0, config.trials)
        return records
    chunk = max(1, -(-config.trials // (workers * 4)))
    spans = [
        (start, min(start + chunk, config.trials))
        for start in range(0, config.trials, chunk)
    ]
    futures = [executor.submit(_record_chunk, config, a, b) for a, b in spans]
    for (a, b), fut in zip(spans, futures):
        records[a:b] = fut.result()
    return records


def run_campaign(configs: list, threads: int = 0) -> list[CampaignResult]:
    """Run every scenario and aggregate its metrics.

    `threads` is the worker-process count (0 = all available cores, 1 = run
    in-process). Results are ordered like `configs` and byte-identical for any
    thread count.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("empty scenario grid")
    workers = threads if threads > 0 else (os.cpu_count() or 1)
    results = []
    _pin_blas_single_thread()
    executor = (
        ProcessPoolExecutor(max_workers=workers, initializer=_pin_blas_single_thread)
        if workers > 1
        else None
    )
    try:
        for config in configs:
            records = _scenario_records(config, executor, workers)
            acc = TrialAccumulator.from_records(records)
            metrics = aggregate_metrics(acc, config.K, config.N_P, config.N_I, config.M)
            results.append(CampaignResult(config, metrics))
    finally:
        if executor is not None:
            executor.shutdown()
    return results
