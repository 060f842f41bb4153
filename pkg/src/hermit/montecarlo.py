"""Paired Monte Carlo BER simulation of the jammer-mitigation receivers.

Every method sees the same transmit symbols, jammer signal and thermal noise in
each trial, so differences between methods are paired. Randomness is derived
from ``SeedSequence(seed, spawn_key=(stream, channel_index))``: the placement
of a channel and the unit-variance trial draws depend only on the experiment
seed and the channel index. The same draws are rescaled for every SNR point,
which makes results independent of execution order and of ``jobs``.
"""

from __future__ import annotations

import dataclasses
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy.stats import norm

from hermit.channel import (
    ArrayGeometry,
    ChannelRealization,
    PlacementSpec,
    generate_geometry,
    realize,
)
from hermit.converter import AdcModel, bussgang_characterize, convert, gain_control, optimal_step_size
from hermit.equalizer import Constellation, lmmse_matrix
from hermit.errors import ConfigurationError
from hermit.transform import QUADRATURE_CARDINALITIES, Alphabet, AnalogTransform, build_transform, covariance

log = logging.getLogger(__name__)

METHODS = ("JL", "DEq", "HERMIT-UQ", "HERMIT-PQ", "HERMIT-QQ")
GEOMETRY_STREAM, TRIAL_STREAM = 0, 1
Z95 = norm.ppf(0.975)


@dataclass(frozen=True)
class ExperimentConfig:
    B: int = 256
    U: int = 32
    propagation: str = "los"
    methods: tuple[str, ...] = METHODS
    q: int = 4
    S: int = 64
    AC: int = 16
    rho_db: float = 25.0
    snr_grid_db: tuple[float, ...] = (0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0)
    trials_per_point: int = 200
    channels_per_point: int = 50
    seed: int = 0
    nlos_paths: int = 20
    nlos_spread_deg: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        self.validate()

    def validate(self) -> None:
        if self.B < 1 or self.U < 1:
            raise ConfigurationError("B and U must be positive")
        if self.S < 1 or self.B % self.S:
            raise ConfigurationError(f"cluster size S={self.S} must divide B={self.B}")
        if self.propagation not in ("los", "nlos"):
            raise ConfigurationError(f"propagation must be 'los' or 'nlos', got {self.propagation!r}")
        if not self.methods:
            raise ConfigurationError("at least one method is required")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigurationError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigurationError("duplicate methods")
        if "HERMIT-QQ" in self.methods and self.AC not in QUADRATURE_CARDINALITIES:
            raise ConfigurationError(
                f"HERMIT-QQ needs a square alphabet cardinality in {QUADRATURE_CARDINALITIES}, got AC={self.AC}"
            )
        if "HERMIT-PQ" in self.methods and self.AC < 2:
            raise ConfigurationError(f"HERMIT-PQ needs AC >= 2, got AC={self.AC}")
        if not 1 <= self.q <= 16:
            raise ConfigurationError(f"ADC resolution q must be in [1, 16], got {self.q}")
        if not self.snr_grid_db:
            raise ConfigurationError("snr_grid_db must not be empty")
        if self.trials_per_point < 1 or self.channels_per_point < 1:
            raise ConfigurationError("trials_per_point and channels_per_point must be >= 1")
        if self.nlos_paths < 1 or self.nlos_spread_deg < 0:
            raise ConfigurationError("nlos_paths must be >= 1 and nlos_spread_deg >= 0")
        if PlacementSpec(self.U).max_entities < self.U + 1:
            raise ConfigurationError(f"U={self.U} UEs plus a jammer do not fit at 1 deg separation")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        d["snr_grid_db"] = list(self.snr_grid_db)
        return d

    @property
    def bits_per_trial(self) -> int:
        return self.U * Constellation().bits_per_symbol


def alphabet_for(method: str, AC: int) -> Alphabet:
    return {
        "HERMIT-UQ": Alphabet.unconstrained,
        "HERMIT-PQ": lambda: Alphabet.phase(AC),
        "HERMIT-QQ": lambda: Alphabet.quadrature(AC),
    }[method]()


@dataclass
class Pipeline:
    """Transform, converter and equalizer of one method for one channel."""

    method: str
    transform: AnalogTransform
    adc: AdcModel
    W: np.ndarray
    jammed: bool = True

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.W @ convert(self.transform.apply(y), self.adc)


def build_pipeline(method: str, channel: ChannelRealization, q: int, S: int, AC: int) -> Pipeline:
    if method == "JL":
        channel = channel.jammerless()
    if method in ("JL", "DEq"):
        T = AnalogTransform.identity(channel.B, S)
    else:
        T = build_transform(channel, S, alphabet_for(method, AC))
    Cy = covariance(channel.H, channel.h_J, channel.Es, channel.Ej, channel.N0)
    adc = AdcModel.for_resolution(q, gain_control(T, Cy))
    W = lmmse_matrix(
        channel.H, channel.h_J, T, channel.Es, channel.Ej, channel.N0,
        adc.bussgang_gain, adc.distortion_var, adc.gains,
    )
    return Pipeline(method, T, adc, W, jammed=method != "JL")


def build_pipelines(channel: ChannelRealization, config: ExperimentConfig) -> dict[str, Pipeline]:
    return {m: build_pipeline(m, channel, config.q, config.S, config.AC) for m in config.methods}


@dataclass
class TrialInputs:
    """Unit-variance randomness of a batch of trials; columns are trials."""

    labels: np.ndarray  # U x N symbol labels
    jammer: np.ndarray  # N, CN(0, 1)
    noise: np.ndarray  # B x N, CN(0, 1)

    @property
    def num_trials(self) -> int:
        return self.labels.shape[1]


def draw_trial_inputs(rng, B: int, U: int, num_trials: int, constellation: Constellation) -> TrialInputs:
    rng = np.random.default_rng(rng)
    labels = rng.integers(0, constellation.order, size=(U, num_trials))
    jammer = np.sqrt(0.5) * (rng.standard_normal(num_trials) + 1j * rng.standard_normal(num_trials))
    noise = np.sqrt(0.5) * (rng.standard_normal((B, num_trials)) + 1j * rng.standard_normal((B, num_trials)))
    return TrialInputs(labels, jammer, noise)


_POPCOUNT = np.array([bin(k).count("1") for k in range(256)], dtype=np.int64)


def evaluate_trials(
    channel: ChannelRealization,
    pipelines: dict[str, Pipeline],
    inputs: TrialInputs,
    constellation: Constellation,
) -> dict[str, np.ndarray]:
    """Bit errors per trial for every method on shared inputs."""
    s = np.sqrt(channel.Es / constellation.energy) * constellation.points[inputs.labels]
    clean = channel.H @ s + np.sqrt(channel.N0) * inputs.noise
    jammed = clean + np.outer(channel.h_J, np.sqrt(channel.Ej) * inputs.jammer)
    errors = {}
    for name, pipe in pipelines.items():
        s_star = pipe(jammed if pipe.jammed else clean)
        detected = constellation.detect_labels(s_star / np.sqrt(channel.Es / constellation.energy))
        errors[name] = _POPCOUNT[detected ^ inputs.labels].sum(axis=0)
    return errors


def run_trials(channel, pipelines, rng, num_trials: int, constellation: Constellation | None = None):
    constellation = constellation or Constellation()
    inputs = draw_trial_inputs(rng, channel.B, channel.U, num_trials, constellation)
    return evaluate_trials(channel, pipelines, inputs, constellation)


def run_trial(channel, pipelines, rng, constellation: Constellation | None = None) -> dict[str, int]:
    """One trial: per-method bit errors on a shared ``(s, s_J, n)`` draw."""
    return {m: int(e[0]) for m, e in run_trials(channel, pipelines, rng, 1, constellation).items()}


def wilson_interval(errors, total, z: float = Z95):
    """Wilson score interval for a binomial proportion (vectorized)."""
    k = np.asarray(errors, dtype=float)
    n = np.asarray(total, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = k / n
        denom = 1 + z**2 / n
        center = (p + z**2 / (2 * n)) / denom
        half = z / denom * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2))
    low = np.where((n > 0) & (k > 0), np.clip(center - half, 0, 1), 0.0)
    high = np.where((n > 0) & (k < n), np.clip(center + half, 0, 1), 1.0)
    return low, high


@dataclass
class BerCurve:
    method: str
    snr_db: np.ndarray
    bit_errors: np.ndarray
    bits_total: np.ndarray

    @property
    def ber(self) -> np.ndarray:
        return self.bit_errors / self.bits_total

    @property
    def ci(self) -> tuple[np.ndarray, np.ndarray]:
        return wilson_interval(self.bit_errors, self.bits_total)

    def merge(self, other: "BerCurve") -> "BerCurve":
        if self.method != other.method or not np.array_equal(self.snr_db, other.snr_db):
            raise ValueError("can only merge curves of the same method and SNR grid")
        return BerCurve(
            self.method, self.snr_db, self.bit_errors + other.bit_errors, self.bits_total + other.bits_total
        )

    def at(self, snr_db: float) -> float:
        return float(self.ber[np.flatnonzero(self.snr_db == snr_db)[0]])


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    channel: int
    trial: int
    snr_db: float
    bits: int
    errors: dict[str, int] = field(hash=False)


def aggregate(records: Iterable[TrialRecord]) -> list[BerCurve]:
    """Sum per-trial error counts into one curve per method."""
    errors: dict[str, dict[float, int]] = defaultdict(lambda: defaultdict(int))
    bits: dict[str, dict[float, int]] = defaultdict(lambda: defaultdict(int))
    order: list[str] = []
    empty = True
    for rec in records:
        empty = False
        for m, e in rec.errors.items():
            if m not in errors:
                order.append(m)
            errors[m][rec.snr_db] += int(e)
            bits[m][rec.snr_db] += rec.bits
    if empty:
        raise ValueError("no records to aggregate")
    curves = []
    for m in order:
        snrs = np.array(sorted(errors[m]))
        curves.append(
            BerCurve(
                m,
                snrs,
                np.array([errors[m][s] for s in snrs], dtype=np.int64),
                np.array([bits[m][s] for s in snrs], dtype=np.int64),
            )
        )
    return curves


def paired_difference(errors_a: np.ndarray, errors_b: np.ndarray, bits_per_trial: int, z: float = Z95):
    """BER difference ``a - b`` and the half-width of its paired normal-approximation CI."""
    d = (np.ravel(errors_a) - np.ravel(errors_b)) / bits_per_trial
    half = z * d.std(ddof=1) / np.sqrt(d.size) if d.size > 1 else np.inf
    return float(d.mean()), float(half)


@dataclass
class SweepResult:
    config: ExperimentConfig
    errors: np.ndarray  # methods x snr x channels x trials

    def trial_errors(self, method: str, snr_db: float) -> np.ndarray:
        m = self.config.methods.index(method)
        k = self.config.snr_grid_db.index(float(snr_db))
        return self.errors[m, k]

    @property
    def curves(self) -> list[BerCurve]:
        bits = self.config.bits_per_trial * self.config.channels_per_point * self.config.trials_per_point
        snr = np.array(self.config.snr_grid_db)
        totals = self.errors.sum(axis=(2, 3))
        return [
            BerCurve(m, snr, totals[i].astype(np.int64), np.full(snr.size, bits, dtype=np.int64))
            for i, m in enumerate(self.config.methods)
        ]

    def curve(self, method: str) -> BerCurve:
        return self.curves[self.config.methods.index(method)]

    def records(self) -> Iterator[TrialRecord]:
        cfg = self.config
        for k, snr in enumerate(cfg.snr_grid_db):
            for c in range(cfg.channels_per_point):
                for t in range(cfg.trials_per_point):
                    yield TrialRecord(
                        cfg.seed, c, t, snr, cfg.bits_per_trial,
                        {m: int(self.errors[i, k, c, t]) for i, m in enumerate(cfg.methods)},
                    )


def channel_geometry(config: ExperimentConfig, channel_index: int):
    ss = np.random.SeedSequence(config.seed, spawn_key=(GEOMETRY_STREAM, channel_index))
    return generate_geometry(
        ArrayGeometry(config.B),
        PlacementSpec(config.U),
        config.propagation,
        np.random.default_rng(ss),
        config.nlos_paths,
        config.nlos_spread_deg,
    )


def simulate_channel(config: ExperimentConfig, channel_index: int) -> np.ndarray:
    """Errors of one channel realization: methods x snr x trials."""
    constellation = Constellation()
    H, h_J, az = channel_geometry(config, channel_index)
    ss = np.random.SeedSequence(config.seed, spawn_key=(TRIAL_STREAM, channel_index))
    inputs = draw_trial_inputs(np.random.default_rng(ss), config.B, config.U, config.trials_per_point, constellation)
    out = np.empty((len(config.methods), len(config.snr_grid_db), config.trials_per_point), dtype=np.int64)
    for k, snr in enumerate(config.snr_grid_db):
        channel = realize(H, h_J, snr, config.rho_db, az)
        errors = evaluate_trials(channel, build_pipelines(channel, config), inputs, constellation)
        for i, m in enumerate(config.methods):
            out[i, k] = errors[m]
    return out


def sweep(config: ExperimentConfig, jobs: int = 1) -> SweepResult:
    config.validate()
    indices = range(config.channels_per_point)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_channel = list(pool.map(simulate_channel, [config] * len(indices), indices))
    else:
        per_channel = [simulate_channel(config, c) for c in indices]
    log.info("simulated %d channels x %d trials", config.channels_per_point, config.trials_per_point)
    errors = np.stack(per_channel, axis=2)
    return SweepResult(config, errors)


def quantizer_metadata(q: int) -> dict:
    step = optimal_step_size(q)
    gamma, D = bussgang_characterize(q, step)
    return {"q": q, "step": step, "bussgang_gain": gamma, "distortion_var": D}
