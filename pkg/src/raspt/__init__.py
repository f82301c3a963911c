"""Link-level Monte Carlo simulator of preamble-assisted short-packet
transmission during cellular random access.

Zadoff-Chu random-access preambles double as uplink reference signals: the
receiver estimates each device's multipath channel from PRACH correlations
(separating multiple root sequences by interference cancellation) and decodes
the devices' simultaneous BPSK short-packets with a per-subcarrier
zero-forcing multi-antenna detector.
"""

from .analysis import (
    MetricEstimate,
    TrialAccumulator,
    analytical_collision_prob,
    ber,
    deterioration_threshold,
    latency_budget,
    mse,
    offered_load,
    success_prob,
)
from .channel import (
    ChannelProfile,
    add_awgn,
    apply_channel,
    draw_cir,
    draw_cirs,
    frequency_response,
    pedestrian_b,
)
from .decoder import (
    RankDeficientError,
    ZfDecodeResult,
    bpsk_demodulate,
    bpsk_modulate,
    solve_least_squares,
    zf_decode,
)
from .detector import (
    CorrelationProfile,
    DetectedPreamble,
    correlate_root,
    detect_active,
    estimate_channels,
    extract_cir,
    reconstruct_root_signal,
    separate_roots,
)
from .sequences import (
    PreambleId,
    circular_convolution,
    circular_correlation,
    generate_preamble,
    zc_sequence,
)
from .simulator import (
    CampaignResult,
    ScenarioConfig,
    TrialOutcome,
    derive_stream,
    run_campaign,
    run_trial,
)
from .uplink import (
    DeviceRealization,
    ReceivedGrid,
    compose_prach,
    compose_spt,
    select_preambles,
)

__version__ = "0.1.0"
