"""Command-line front end: scenario configuration, figure-style sweep presets,
CSV emission, and the closed-form formula utilities."""

import csv
import itertools
import json
import os
import sys
import tempfile

import click
import numpy as np

from . import analysis, decoder, detector, sequences
from .channel import ChannelProfile, draw_cirs, pedestrian_b
from .simulator import CampaignResult, ScenarioConfig, run_campaign, run_trial
from .uplink import DeviceRealization, compose_prach, select_preambles

__all__ = ["main", "load_config", "preset_scenarios", "write_results", "CSV_HEADER"]

CSV_HEADER = ("M", "N_I", "K", "snr_db", "mode", "trials", "seed",
              "metric", "value", "ci", "count")

# Scalar configuration keys, in sweep-expansion order; a JSON list value for
# any of them expands the grid by Cartesian product (row-major in this order).
_SCALAR_KEYS = (
    ("M", int),
    ("N_I", int),
    ("K", int),
    ("N_P", int),
    ("N_cs", int),
    ("N_zc", int),
    ("N_sc", int),
    ("snr_db", (int, float)),
    ("detector_mode", str),
    ("pic_iterations", int),
    ("threshold_factor", (int, float)),
    ("trials", int),
    ("seed", int),
)
_LIST_KEYS = ("roots", "channel_delays_ns", "channel_powers_db")
_KNOWN_KEYS = tuple(k for k, _ in _SCALAR_KEYS) + _LIST_KEYS + ("channel_sample_period_s",)


def _key_line(text: str, key: str) -> int:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return lineno
    return 0


def load_config(path: str) -> list[ScenarioConfig]:
    """Parse a flat-JSON scenario file into a list of configurations.

    Keys mirror ScenarioConfig fields; a list value on a scalar key sweeps it,
    and the grid expands as the Cartesian product of all swept keys.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: top level must be a JSON object")

    for key in raw:
        if key not in _KNOWN_KEYS:
            raise ValueError(f"{path}: unknown key '{key}' (line {_key_line(text, key)})")

    def typecheck(key, types, value):
        if isinstance(value, bool) or not isinstance(value, types):
            raise ValueError(
                f"{path}: key '{key}' (line {_key_line(text, key)}) has wrong type: "
                f"{value!r}"
            )

    sweeps, fixed = [], {}
    for key, types in _SCALAR_KEYS:
        if key not in raw:
            continue
        value = raw[key]
        if isinstance(value, list):
            if not value:
                raise ValueError(f"{path}: key '{key}' sweep list is empty")
            for v in value:
                typecheck(key, types, v)
            sweeps.append((key, value))
        else:
            typecheck(key, types, value)
            fixed[key] = value

    if "roots" in raw:
        roots = raw["roots"]
        if not isinstance(roots, list) or not roots:
            raise ValueError(f"{path}: key 'roots' must be a non-empty list")
        if all(isinstance(r, list) for r in roots):
            sweeps.append(("roots", [tuple(r) for r in roots]))
        else:
            fixed["roots"] = tuple(roots)

    profile_keys = {"channel_delays_ns", "channel_powers_db"} & raw.keys()
    if profile_keys:
        if profile_keys != {"channel_delays_ns", "channel_powers_db"}:
            raise ValueError(
                f"{path}: channel_delays_ns and channel_powers_db must be given together"
            )
        fixed["channel_profile"] = ChannelProfile(
            tuple(raw["channel_delays_ns"]),
            tuple(raw["channel_powers_db"]),
            raw.get("channel_sample_period_s", pedestrian_b().sample_period_s),
        )

    configs = []
    for combo in itertools.product(*(values for _, values in sweeps)):
        kwargs = dict(fixed)
        kwargs.update({key: value for (key, _), value in zip(sweeps, combo)})
        configs.append(ScenarioConfig(**kwargs))
    return configs


def preset_scenarios(name: str, trials: int | None = None, seed: int = 1,
                     mode: str = "genie") -> list[ScenarioConfig]:
    """Scenario grids reproducing the headline experiments.

    fig5: estimation MSE vs multiplexed-device count and SNR (K in {1,5}).
    fig6: collision probability and BER vs device count at M=8, 23 dB.
    fig7: short-packet success probability vs device count at 23 dB, M in {8,16}.
    """
    if name == "fig5":
        t = trials if trials is not None else 20000
        return [
            ScenarioConfig(M=8, N_I=n_i, K=k, snr_db=float(snr), trials=t,
                           seed=seed, detector_mode=mode)
            for k in (1, 5)
            for snr in range(5, 26, 2)
            for n_i in (1, 2, 4, 8)
        ]
    if name == "fig6":
        t = trials if trials is not None else 20000
        return [
            ScenarioConfig(M=8, N_I=n_i, K=k, snr_db=23.0, trials=t,
                           seed=seed, detector_mode=mode)
            for k in (1, 5)
            for n_i in range(1, 9)
        ]
    if name == "fig7":
        t = trials if trials is not None else 100000
        return [
            ScenarioConfig(M=m, N_I=n_i, K=k, snr_db=23.0, trials=t,
                           seed=seed, detector_mode=mode)
            for m in (8, 16)
            for k in (1, 5)
            for n_i in range(1, 9)
        ]
    raise ValueError(f"unknown preset '{name}' (expected fig5, fig6, or fig7)")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def result_rows(results: list[CampaignResult]) -> list[tuple]:
    rows = []
    for res in results:
        cfg = res.config
        for name in analysis.METRIC_NAMES:
            est = res.metrics[name]
            rows.append((
                cfg.M, cfg.N_I, cfg.K, _fmt(float(cfg.snr_db)), cfg.detector_mode,
                cfg.trials, cfg.seed, name, _fmt(float(est.value)),
                _fmt(float(est.ci_halfwidth)), est.count,
            ))
    return rows


def write_results(results: list[CampaignResult], out_path: str | None) -> None:
    """Emit the fixed-schema CSV; file writes go through a temp file + rename."""
    rows = result_rows(results)
    if out_path is None:
        writer = csv.writer(sys.stdout)
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
        return
    directory = os.path.dirname(os.path.abspath(out_path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            writer.writerows(rows)
        os.replace(tmp_path, out_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _run_and_write(configs, threads, out):
    results = run_campaign(configs, threads=threads)
    write_results(results, out)
    if out is not None:
        click.echo(f"wrote {len(configs) * len(analysis.METRIC_NAMES)} rows to {out}")


@click.group()
def main():
    """Link-level simulator of preamble-assisted short-packet random access."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON scenario file (grid sweeps allowed).")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Output CSV path (stdout when omitted).")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None)
@click.option("--trials", type=click.IntRange(1), default=None)
@click.option("--mode", type=click.Choice(["genie", "blind"]), default=None)
@click.option("--threads", type=click.IntRange(0), default=0, show_default=True,
              help="Worker processes (0 = auto).")
@click.option("--M", "m_antennas", type=click.IntRange(1), default=None)
@click.option("--Ni", "n_i", type=click.IntRange(1), default=None)
@click.option("--K", "k_roots", type=click.IntRange(1), default=None)
@click.option("--snr", type=float, default=None, help="SNR in dB.")
def simulate(config_path, out, seed, trials, mode, threads, m_antennas, n_i,
             k_roots, snr):
    """Run one scenario (flags) or a scenario grid (--config)."""
    try:
        if config_path is not None:
            configs = load_config(config_path)
        else:
            configs = [ScenarioConfig()]
        overrides = {}
        if seed is not None:
            overrides["seed"] = seed
        if trials is not None:
            overrides["trials"] = trials
        if mode is not None:
            overrides["detector_mode"] = mode
        if m_antennas is not None:
            overrides["M"] = m_antennas
        if n_i is not None:
            overrides["N_I"] = n_i
        if k_roots is not None:
            overrides["K"] = k_roots
            overrides["roots"] = None
        if snr is not None:
            overrides["snr_db"] = snr
        if overrides:
            configs = [_replace_config(c, overrides) for c in configs]
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    _run_and_write(configs, threads, out)


def _replace_config(config: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    fields = {
        "M": config.M, "N_I": config.N_I, "K": config.K, "roots": config.roots,
        "N_P": config.N_P, "N_cs": config.N_cs, "N_zc": config.N_zc,
        "N_sc": config.N_sc, "snr_db": config.snr_db,
        "detector_mode": config.detector_mode,
        "pic_iterations": config.pic_iterations,
        "threshold_factor": config.threshold_factor,
        "trials": config.trials, "seed": config.seed,
        "channel_profile": config.channel_profile,
    }
    fields.update(overrides)
    return ScenarioConfig(**fields)


@main.command()
@click.argument("name", type=click.Choice(["fig5", "fig6", "fig7"]))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=1, show_default=True)
@click.option("--trials", type=click.IntRange(1), default=None,
              help="Override the preset's default trial count.")
@click.option("--mode", type=click.Choice(["genie", "blind"]), default="genie",
              show_default=True)
@click.option("--threads", type=click.IntRange(0), default=0, show_default=True)
def preset(name, out, seed, trials, mode, threads):
    """Run a figure-reproduction scenario grid."""
    try:
        configs = preset_scenarios(name, trials=trials, seed=seed, mode=mode)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    _run_and_write(configs, threads, out)


@main.command()
@click.option("--K", "k_roots", type=click.IntRange(1), default=1, show_default=True)
@click.option("--Np", "n_p", type=click.IntRange(1), default=64, show_default=True)
@click.option("--Ni", "n_i", type=click.IntRange(1), default=1, show_default=True)
@click.option("--M", "m_antennas", type=click.IntRange(1), default=8, show_default=True)
@click.option("--pb", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True,
              help="Bit error rate entering the success-probability product.")
def formulas(k_roots, n_p, n_i, m_antennas, pb):
    """Evaluate the closed-form collision/success/load/latency expressions."""
    p_c = analysis.analytical_collision_prob(k_roots, n_p, n_i)
    click.echo(f"p_c = {p_c!r}")
    click.echo(f"p_s = {analysis.success_prob(p_c, pb, n_i, m_antennas)!r}")
    click.echo(f"deterioration_threshold = {analysis.deterioration_threshold(k_roots, n_p)!r}")
    total = 0.0
    for phase, ms in analysis.latency_budget():
        click.echo(f"latency_ms {phase} = {ms!r}")
        total += ms
    click.echo(f"latency_total_ms = {total!r}")


@main.command()
def selftest():
    """Run the built-in invariant checks."""
    failures = 0
    for name, fn in _SELFTESTS:
        try:
            fn()
            click.echo(f"selftest {name}: PASS")
        except AssertionError as exc:
            failures += 1
            click.echo(f"selftest {name}: FAIL ({exc})")
    if failures:
        raise click.ClickException(f"{failures} selftest(s) failed")
    click.echo("all selftests passed")


def _check_zc_identities():
    n_zc = 839
    z = sequences.zc_sequence(5, n_zc)
    assert np.max(np.abs(np.abs(z) - 1.0)) < 1e-12, "unit modulus violated"
    auto = sequences.circular_correlation(z, z)
    assert abs(auto[0] - n_zc) < 1e-9, "auto-correlation peak off"
    assert np.max(np.abs(auto[1:])) <= 1e-9 * n_zc, "auto-correlation floor off"
    cross = sequences.circular_correlation(z, sequences.zc_sequence(11, n_zc))
    assert np.max(np.abs(np.abs(cross) - np.sqrt(n_zc))) < 1e-6 * np.sqrt(n_zc), \
        "cross-correlation not constant"


def _check_correlation_fft_path():
    rng = np.random.default_rng(3)
    a = rng.standard_normal(101) + 1j * rng.standard_normal(101)
    b = rng.standard_normal(101) + 1j * rng.standard_normal(101)
    direct = np.array(
        [np.sum(a * np.conj(np.roll(b, -alpha))) for alpha in range(101)]
    )
    fast = sequences.circular_correlation(a, b)
    assert np.max(np.abs(fast - direct)) < 1e-9 * np.max(np.abs(direct)), \
        "FFT path disagrees with direct summation"


def _check_noise_free_round_trip():
    config = ScenarioConfig(M=2, N_I=2, K=1, snr_db=0.0, trials=1, seed=11)
    ids = [sequences.PreambleId(1, 3), sequences.PreambleId(1, 9)]
    rng = np.random.default_rng(5)
    devices = [
        DeviceRealization(pid, np.zeros(config.N_sc, dtype=np.uint8),
                          draw_cirs(config.channel_profile, 2, rng, config.N_cs))
        for pid in ids
    ]
    y = compose_prach(devices, 2, config.N_zc, config.N_cs, 1.0, 0.0, rng)
    dets = detector.estimate_channels(y, [1], config.N_cs, genie_info=ids, beta=1.0)
    for dev, det in zip(devices, sorted(dets, key=lambda d: d.id.shift)):
        padded = np.zeros((2, config.N_cs), dtype=complex)
        padded[:, : dev.cirs.shape[1]] = dev.cirs
        assert np.max(np.abs(det.cir_estimates - padded)) < 1e-10, \
            "noise-free channel estimate not exact"


def _check_collision_law():
    rng = np.random.default_rng(17)
    n = 20000
    hits = 0
    for _ in range(n):
        a, b = select_preambles(2, [1], 64, rng)
        hits += a == b
    p_hat = hits / n
    sigma = np.sqrt((1 / 64) * (63 / 64) / n)
    assert abs(p_hat - 1 / 64) < 4 * sigma, f"p_hat = {p_hat}"


def _check_trial_determinism():
    config = ScenarioConfig(M=2, N_I=2, K=2, snr_db=10.0, trials=1, seed=42)
    a = run_trial(config, 0)
    b = run_trial(config, 0)
    assert np.array_equal(a.bit_errors, b.bit_errors), "bit errors differ"
    assert np.array_equal(a.mse, b.mse, equal_nan=True), "mse differs"


def _check_zero_forcing_exact():
    rng = np.random.default_rng(23)
    m, n, n_sc = 4, 3, 16
    h = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    bits = rng.integers(0, 2, size=(n, n_sc))
    s = decoder.bpsk_modulate(bits)
    y = h.T @ s
    dets = []
    for j in range(n):
        # Flat per-subcarrier response via a single-tap window.
        win = np.zeros((m, 13), dtype=complex)
        win[:, 0] = h[j]
        dets.append(detector.DetectedPreamble(sequences.PreambleId(1, j + 1), win, 0.0))
    out = decoder.zf_decode(y, dets, beta=1.0)
    assert not out.failed.any(), "unexpected rank failure"
    assert np.array_equal(out.bits, bits), "noise-free ZF decode not exact"


def _check_formulas():
    assert abs(analysis.deterioration_threshold(1, 64) - 63.4992) < 5e-5
    assert sum(ms for _, ms in analysis.latency_budget()) == 6.0
    assert analysis.analytical_collision_prob(1, 64, 2) == 1 / 64


_SELFTESTS = [
    ("zc_identities", _check_zc_identities),
    ("fft_correlation_path", _check_correlation_fft_path),
    ("noise_free_round_trip", _check_noise_free_round_trip),
    ("collision_law", _check_collision_law),
    ("trial_determinism", _check_trial_determinism),
    ("zero_forcing_exact", _check_zero_forcing_exact),
    ("formulas", _check_formulas),
]


if __name__ == "__main__":
    main()
