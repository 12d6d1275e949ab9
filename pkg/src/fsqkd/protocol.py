"""B92 session engine: preparation, measurement, sifting and rate predictions.

A session runs in discrete pulse slots.  For each slot Alice draws a random
bit and a Poisson photon number, the channel thins the pulse, and Bob's
two-counter receiver reports no-click, a conclusive click or a dual-fire.
Bob then announces the slots holding conclusive clicks, and both sides
keep those bits as raw key.

The slot loop is vectorised in fixed-size chunks.  With a fixed chunk size
and seed, results are bit-for-bit reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Protocol, Sequence

import numpy as np
from scipy.special import gammaln

from .classical import ClassicalChannel, ClassicalMessage
from .devices import (
    Cause,
    ChannelModel,
    DetectionOutcome,
    DetectorModel,
    OutcomeKind,
    receive,
    transmit,
)
from .photonics import AnalyzerSetting, PhotonNumberDistribution, PolarizationState
from .streams import check_seed, session_streams

B92_EFFICIENCY = 0.25
CHUNK = 1 << 18


def alice_prepare(bit: int) -> PolarizationState:
    if bit == 0:
        return PolarizationState.HORIZONTAL
    if bit == 1:
        return PolarizationState.RIGHT_CIRCULAR
    raise ValueError(f"bit must be 0 or 1, got {bit!r}")


def prepare_states(bits: np.ndarray) -> np.ndarray:
    """Vector form of ``alice_prepare``."""
    return np.where(bits == 1, PolarizationState.RIGHT_CIRCULAR, PolarizationState.HORIZONTAL).astype(np.uint8)


def bob_choose_analyzer(rng: np.random.Generator) -> AnalyzerSetting:
    """One 50/50 beamsplitter decision."""
    return AnalyzerSetting(int(rng.random() < 0.5))


@dataclass(frozen=True)
class SessionConfig:
    pulse_count: int = 1_000_000
    pulse_rate_hz: float = 20e3
    mean_photon_number: float = 0.1
    channel: ChannelModel = field(default_factory=ChannelModel)
    detector: DetectorModel = field(default_factory=DetectorModel)
    seed: int = 0
    force_single_photon: bool = False

    def __post_init__(self):
        if isinstance(self.pulse_count, bool) or int(self.pulse_count) != self.pulse_count or self.pulse_count < 1:
            raise ValueError(f"pulse_count must be an integer >= 1, got {self.pulse_count}")
        if not (math.isfinite(self.pulse_rate_hz) and self.pulse_rate_hz > 0):
            raise ValueError(f"pulse_rate_hz must be > 0, got {self.pulse_rate_hz}")
        PhotonNumberDistribution(self.mean_photon_number)
        check_seed(self.seed)

    @property
    def duration_s(self) -> float:
        return self.pulse_count / self.pulse_rate_hz


@dataclass(frozen=True)
class PulseRecord:
    slot: int
    timestamp_s: float
    bit: int
    state: PolarizationState
    photons: int
    outcome: DetectionOutcome


@dataclass(frozen=True)
class SlotTrace:
    """Per-slot arrays of a session, kept only on request."""

    pulse_rate_hz: float
    bits: np.ndarray
    photons: np.ndarray  # leaving the transmitter towards Bob
    arriving: np.ndarray
    kind: np.ndarray
    bob_bit: np.ndarray
    cause: np.ndarray

    def records(self) -> Iterator[PulseRecord]:
        for i in range(self.bits.size):
            kind = OutcomeKind(int(self.kind[i]))
            if kind == OutcomeKind.CONCLUSIVE:
                outcome = DetectionOutcome.conclusive(int(self.bob_bit[i]), Cause(int(self.cause[i])))
            else:
                outcome = DetectionOutcome(kind)
            yield PulseRecord(
                slot=i,
                timestamp_s=i / self.pulse_rate_hz,
                bit=int(self.bits[i]),
                state=alice_prepare(int(self.bits[i])),
                photons=int(self.photons[i]),
                outcome=outcome,
            )


@dataclass(frozen=True)
class SessionResult:
    config: SessionConfig
    alice_raw_key: np.ndarray
    bob_raw_key: np.ndarray
    sifted_indices: np.ndarray
    sifted_rate_hz: float
    ber: float  # NaN when nothing was sifted
    dual_fire_count: int
    background_click_count: int  # sifted slots whose click came from background
    dark_click_count: int  # sifted slots whose click came from dark counts
    click_count: int  # slots with at least one counter firing
    announcement: ClassicalMessage
    trace: SlotTrace | None = None

    def __post_init__(self):
        if not (self.alice_raw_key.size == self.bob_raw_key.size == self.sifted_indices.size):
            raise ValueError("raw keys and sifted indices must have equal length")

    @property
    def sifted_count(self) -> int:
        return int(self.sifted_indices.size)

    @property
    def sifted_fraction(self) -> float:
        return self.sifted_count / self.config.pulse_count

    @property
    def detection_frequency(self) -> float:
        return self.click_count / self.config.pulse_count

    @property
    def error_count(self) -> int:
        return int(np.count_nonzero(self.alice_raw_key != self.bob_raw_key))

    @property
    def dual_fire_rate_hz(self) -> float:
        return self.dual_fire_count / self.config.duration_s


class Interceptor(Protocol):
    """Anything sitting between Alice's transmitter and the channel."""

    def intercept(self, offset: int, states: np.ndarray, photons: np.ndarray,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]: ...


def sift_indices(kinds: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.asarray(kinds) == OutcomeKind.CONCLUSIVE)


def sift(bob_outcomes: Iterable[DetectionOutcome]) -> tuple[ClassicalMessage, np.ndarray]:
    """Bob's public announcement of conclusive single-counter slots."""
    kinds = np.fromiter((o.kind for o in bob_outcomes), dtype=np.uint8)
    idx = sift_indices(kinds)
    return ClassicalMessage.sift_announce(idx), idx


def measure_ber(alice_raw: Sequence[int], bob_raw: Sequence[int]) -> float:
    a = np.asarray(alice_raw)
    b = np.asarray(bob_raw)
    if a.shape != b.shape:
        raise ValueError(f"key length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("BER of an empty key is undefined")
    return float(np.count_nonzero(a != b)) / a.size


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def run_session(config: SessionConfig, *, record_slots: bool = False,
                interceptor: Interceptor | None = None) -> SessionResult:
    streams = session_streams(config.seed)
    source = PhotonNumberDistribution(config.mean_photon_number)
    bits_all, bob_all, idx_all = [], [], []
    trace_parts: list[tuple] = []
    clicks_total = dual_total = bg_total = dark_total = 0

    for offset in range(0, config.pulse_count, CHUNK):
        m = min(CHUNK, config.pulse_count - offset)
        bits = streams["alice"].integers(0, 2, size=m, dtype=np.uint8)
        if config.force_single_photon:
            photons = np.ones(m, dtype=np.int64)
        else:
            photons = source.sample(streams["alice"], m)
        states = prepare_states(bits)
        if interceptor is not None:
            states, photons = interceptor.intercept(offset, states, photons, streams["eve"])
        arriving = transmit(photons, config.channel, streams["channel"])
        clicks = receive(arriving, states, config.channel, config.detector, streams["bob"])

        kind = clicks.kind
        local = sift_indices(kind)
        cause = clicks.cause
        idx_all.append(local + offset)
        bits_all.append(bits[local])
        bob_all.append(clicks.bit[local])
        clicks_total += int(np.count_nonzero(kind))
        dual_total += int(np.count_nonzero(kind == OutcomeKind.DUAL_FIRE))
        bg_total += int(np.count_nonzero(cause == Cause.BACKGROUND))
        dark_total += int(np.count_nonzero(cause == Cause.DARK))
        if record_slots:
            trace_parts.append((bits, photons, arriving, kind, clicks.bit, cause))

    sifted = np.concatenate(idx_all)
    alice_key = np.concatenate(bits_all)
    bob_key = np.concatenate(bob_all)

    channel = ClassicalChannel()
    announcement = channel.exchange(ClassicalMessage.sift_announce(sifted))

    trace = None
    if record_slots:
        cols = [np.concatenate(c) for c in zip(*trace_parts)]
        trace = SlotTrace(config.pulse_rate_hz, *(_frozen(c) for c in cols))

    return SessionResult(
        config=config,
        alice_raw_key=_frozen(alice_key),
        bob_raw_key=_frozen(bob_key),
        sifted_indices=_frozen(sifted),
        sifted_rate_hz=sifted.size / config.duration_s,
        ber=measure_ber(alice_key, bob_key) if sifted.size else math.nan,
        dual_fire_count=dual_total,
        background_click_count=bg_total,
        dark_click_count=dark_total,
        click_count=clicks_total,
        announcement=announcement,
        trace=trace,
    )


def _check_efficiency(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must be in [0, 1], got {value}")


def detection_probability_series(mean_photon_number: float, composite_efficiency: float) -> float:
    """Photon-number sum form of Bob's detection probability.

    Sums P(n) * (1 - (1 - eta)**n) over n >= 1 until the Poisson tail is
    below 1e-15.
    """
    mu = float(mean_photon_number)
    if mu == 0:
        return 0.0
    top = int(math.ceil(mu + 40.0 * math.sqrt(mu) + 40.0))
    n = np.arange(1, top + 1, dtype=float)
    pmf = np.exp(-mu + n * math.log(mu) - gammaln(n + 1))
    with np.errstate(divide="ignore"):
        miss = n * np.log1p(-composite_efficiency)
    return float(np.sum(pmf * -np.expm1(miss)))


def theoretical_detection_probability(
    mean_photon_number: float,
    coupling_efficiency: float,
    detector_efficiency: float,
    protocol_efficiency: float = B92_EFFICIENCY,
) -> float:
    """Bob's per-pulse detection probability, 1 - exp(-mean * eta_B).

    ``eta_B`` is the product of coupling, detector and protocol
    efficiencies.  For means up to 700 the photon-number series is
    evaluated too, and the two forms must agree to 1e-12.
    """
    mu = float(mean_photon_number)
    if not (math.isfinite(mu) and mu >= 0):
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    _check_efficiency("coupling_efficiency", coupling_efficiency)
    _check_efficiency("detector_efficiency", detector_efficiency)
    _check_efficiency("protocol_efficiency", protocol_efficiency)
    eta_b = coupling_efficiency * detector_efficiency * protocol_efficiency
    closed = -math.expm1(-mu * eta_b)
    if mu <= 700:
        series = detection_probability_series(mu, eta_b)
        if abs(series - closed) > 1e-12:
            raise ArithmeticError(f"series {series!r} disagrees with closed form {closed!r}")
    return closed


def expected_bit_rate(pulse_rate_hz: float, detection_probability: float) -> float:
    _check_efficiency("detection_probability", detection_probability)
    return pulse_rate_hz * detection_probability
