"""Channel loss, detector noise and the two-SPCM B92 receiver.

The receiver follows the optical layout directly: a 50/50 beamsplitter
sends each photon down one of two analyzer paths, each path ends in its
own single-photon counter, and a click in the "test for zero" counter
means bit 0.  Misalignment moves a click to the other counter.
Background and dark counts fire each counter independently within the
coincidence gate.  Both counters firing in one gate is a dual-fire.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .photonics import PASSAGE, AnalyzerSetting, PolarizationState

MIN_DUALFIRE_GATES = 10_000


def _check_probability(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must be in [0, 1], got {value}")


def _check_rate(name: str, value: float) -> None:
    if not (math.isfinite(value) and value >= 0.0):
        raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class ChannelModel:
    """Scalar optical channel.

    ``background_rate_hz`` is the ambient rate summed over both detectors;
    each detector sees half of it.
    """

    coupling_efficiency: float = 0.14
    misalignment_flip_prob: float = 0.015
    background_rate_hz: float = 1100.0

    def __post_init__(self):
        _check_probability("coupling_efficiency", self.coupling_efficiency)
        _check_probability("misalignment_flip_prob", self.misalignment_flip_prob)
        _check_rate("background_rate_hz", self.background_rate_hz)


@dataclass(frozen=True)
class DetectorModel:
    """One SPCM type, used for both receiver arms; dark rate is per detector."""

    efficiency: float = 0.65
    dark_rate_hz: float = 80.0
    gate_window_s: float = 5e-9

    def __post_init__(self):
        _check_probability("efficiency", self.efficiency)
        _check_rate("dark_rate_hz", self.dark_rate_hz)
        if not (math.isfinite(self.gate_window_s) and self.gate_window_s > 0):
            raise ValueError(f"gate_window_s must be > 0, got {self.gate_window_s}")


def gate_noise_probabilities(channel: ChannelModel, detector: DetectorModel) -> tuple[float, float]:
    """Per-gate, per-detector click probabilities from background and dark noise."""
    p_bg = 0.5 * channel.background_rate_hz * detector.gate_window_s
    p_dark = detector.dark_rate_hz * detector.gate_window_s
    if p_bg > 1 or p_dark > 1:
        raise ValueError("noise rate times gate window exceeds one click per gate")
    return p_bg, p_dark


class OutcomeKind(enum.IntEnum):
    NO_CLICK = 0
    CONCLUSIVE = 1
    DUAL_FIRE = 2


class Cause(enum.IntEnum):
    NONE = 0
    SIGNAL = 1
    BACKGROUND = 2
    DARK = 3


@dataclass(frozen=True)
class DetectionOutcome:
    kind: OutcomeKind
    bit: int | None = None
    cause: Cause | None = None

    def __post_init__(self):
        if (self.kind == OutcomeKind.CONCLUSIVE) != (self.bit is not None):
            raise ValueError("a bit value is carried by conclusive outcomes only")

    @classmethod
    def no_click(cls) -> DetectionOutcome:
        return cls(OutcomeKind.NO_CLICK)

    @classmethod
    def dual_fire(cls) -> DetectionOutcome:
        return cls(OutcomeKind.DUAL_FIRE)

    @classmethod
    def conclusive(cls, bit: int, cause: Cause = Cause.SIGNAL) -> DetectionOutcome:
        return cls(OutcomeKind.CONCLUSIVE, int(bit), Cause(cause))


class Clicks(NamedTuple):
    """Per-slot detector firings; index 0 is the test-for-zero counter."""

    arm0: np.ndarray
    arm1: np.ndarray
    cause0: np.ndarray
    cause1: np.ndarray

    @property
    def kind(self) -> np.ndarray:
        return (self.arm0.astype(np.uint8) + self.arm1.astype(np.uint8)).astype(np.uint8)

    @property
    def any(self) -> np.ndarray:
        return self.arm0 | self.arm1

    @property
    def conclusive(self) -> np.ndarray:
        return self.arm0 ^ self.arm1

    @property
    def dual(self) -> np.ndarray:
        return self.arm0 & self.arm1

    @property
    def bit(self) -> np.ndarray:
        """Decoded bit, meaningful on conclusive slots only."""
        return self.arm1.astype(np.uint8)

    @property
    def cause(self) -> np.ndarray:
        """Cause of the firing counter on conclusive slots, NONE elsewhere."""
        out = np.where(self.arm0, self.cause0, self.cause1)
        return np.where(self.conclusive, out, Cause.NONE).astype(np.uint8)


def transmit(photon_count, channel: ChannelModel, rng: np.random.Generator):
    """Binomial thinning of photons by the coupling efficiency."""
    if np.any(np.asarray(photon_count) < 0):
        raise ValueError("photon_count must be >= 0")
    out = rng.binomial(photon_count, channel.coupling_efficiency)
    return int(out) if np.ndim(out) == 0 else out


def receive(
    arriving: np.ndarray,
    states: np.ndarray,
    channel: ChannelModel,
    detector: DetectorModel,
    rng: np.random.Generator,
    analyzer=None,
) -> Clicks:
    """Run the two-counter receiver over a batch of gates.

    Parameters
    ----------
    arriving : ndarray of int
        Photons reaching the receiver beamsplitter in each gate.
    states : ndarray of int
        ``PolarizationState`` codes of those photons.
    analyzer : None or array-like of AnalyzerSetting
        ``None`` models the passive 50/50 beamsplitter, routing every photon
        independently.  Otherwise all photons of a gate go to the given path.
    """
    arriving = np.asarray(arriving, dtype=np.int64)
    states = np.broadcast_to(np.asarray(states, dtype=np.intp), arriving.shape)
    size = arriving.shape
    sig = [np.zeros(size, dtype=bool), np.zeros(size, dtype=bool)]

    lit = np.flatnonzero(arriving)
    if lit.size:
        n = arriving[lit]
        s = states[lit]
        if analyzer is None:
            to_one = rng.binomial(n, 0.5)
        else:
            chosen = np.broadcast_to(np.asarray(analyzer, dtype=np.intp), size)[lit]
            to_one = np.where(chosen == AnalyzerSetting.TEST_FOR_ONE, n, 0)
        eta_d = detector.efficiency
        hits0 = rng.binomial(n - to_one, PASSAGE[s, 0] * eta_d)
        hits1 = rng.binomial(to_one, PASSAGE[s, 1] * eta_d)
        f = channel.misalignment_flip_prob
        if f > 0:
            moved0 = rng.binomial(hits0, f)
            moved1 = rng.binomial(hits1, f)
            hits0, hits1 = hits0 - moved0 + moved1, hits1 - moved1 + moved0
        sig[0][lit] = hits0 > 0
        sig[1][lit] = hits1 > 0

    p_bg, p_dark = gate_noise_probabilities(channel, detector)
    arms, causes = [], []
    for j in (0, 1):
        bg = rng.random(size) < p_bg if p_bg > 0 else np.zeros(size, dtype=bool)
        dark = rng.random(size) < p_dark if p_dark > 0 else np.zeros(size, dtype=bool)
        cause = np.select(
            [sig[j], bg, dark], [Cause.SIGNAL, Cause.BACKGROUND, Cause.DARK], Cause.NONE
        ).astype(np.uint8)
        arms.append(sig[j] | bg | dark)
        causes.append(cause)
    return Clicks(arms[0], arms[1], causes[0], causes[1])


def detect_slot(
    arriving_photons: int,
    alice_state: PolarizationState,
    analyzer: AnalyzerSetting | None,
    channel: ChannelModel,
    detector: DetectorModel,
    rng: np.random.Generator,
) -> DetectionOutcome:
    """Single-gate receiver outcome (scalar wrapper around ``receive``)."""
    clicks = receive(
        np.array([arriving_photons]),
        np.array([int(alice_state)]),
        channel,
        detector,
        rng,
        analyzer=None if analyzer is None else [int(analyzer)],
    )
    kind = OutcomeKind(int(clicks.kind[0]))
    if kind == OutcomeKind.CONCLUSIVE:
        return DetectionOutcome.conclusive(int(clicks.bit[0]), Cause(int(clicks.cause[0])))
    return DetectionOutcome(kind)


def expected_noise_click_rate(noise_rate_hz: float, gate_window_s: float, pulse_rate_hz: float) -> float:
    """Rate of noise clicks that land inside the coincidence gates."""
    for name, v in (("noise_rate_hz", noise_rate_hz), ("gate_window_s", gate_window_s),
                    ("pulse_rate_hz", pulse_rate_hz)):
        _check_rate(name, v)
    return noise_rate_hz * gate_window_s * pulse_rate_hz


def _arm_photon_rates(state: PolarizationState, channel: ChannelModel, detector: DetectorModel):
    # Per-photon click probability of each counter behind the passive beamsplitter.
    f = channel.misalignment_flip_prob
    direct = 0.5 * PASSAGE[state] * detector.efficiency
    return direct * (1 - f) + direct[::-1] * f


def dual_fire_probability(mean_photon_number: float, channel: ChannelModel, detector: DetectorModel) -> float:
    """Closed-form dual-fire probability per gate for a Poisson source.

    Thinning a Poisson pulse leaves independent Poisson photon numbers in
    the two counters, so the joint firing probability factorises.  The
    result is averaged over Alice's two B92 states.
    """
    mu = float(mean_photon_number) * channel.coupling_efficiency
    p_bg, p_dark = gate_noise_probabilities(channel, detector)
    quiet = (1 - p_bg) * (1 - p_dark)
    total = 0.0
    for state in (PolarizationState.HORIZONTAL, PolarizationState.RIGHT_CIRCULAR):
        a = _arm_photon_rates(state, channel, detector)
        fire = 1.0 - quiet * np.exp(-mu * a)
        total += 0.5 * fire[0] * fire[1]
    return float(total)


@dataclass(frozen=True)
class DualFireEstimate:
    mean_photon_number: float
    mean_at_detectors: float
    upper_bound: bool
    dual_fire_probability: float


def estimate_mean_photons_from_dualfire(
    dual_fires: int, gates: int, channel: ChannelModel, detector: DetectorModel
) -> DualFireEstimate:
    """Infer the source mean photon number from an observed dual-fire count.

    With no dual-fires observed, the returned value is a one-sided ~95%
    upper bound (three events) and ``upper_bound`` is set.
    """
    if gates < MIN_DUALFIRE_GATES:
        raise ValueError(f"need at least {MIN_DUALFIRE_GATES} gates, got {gates}")
    if dual_fires < 0 or dual_fires > gates:
        raise ValueError("dual_fires must lie in [0, gates]")
    upper = dual_fires == 0
    observed = (3.0 if upper else dual_fires) / gates

    def excess(mean):
        return dual_fire_probability(mean, channel, detector) - observed

    rates = _arm_photon_rates(PolarizationState.HORIZONTAL, channel, detector)
    if channel.coupling_efficiency == 0 or np.any(rates == 0):
        raise ValueError("dual-fire rate carries no photon-number information for this receiver")
    if excess(0.0) >= 0:
        mean = 0.0
    else:
        hi = 1.0
        while excess(hi) < 0:
            hi *= 2
            if hi > 1e9:
                raise ValueError("observed dual-fire rate is not reachable")
        mean = brentq(excess, 0.0, hi, xtol=1e-12, rtol=1e-10)
    return DualFireEstimate(
        mean_photon_number=mean,
        mean_at_detectors=mean * channel.coupling_efficiency,
        upper_bound=upper,
        dual_fire_probability=observed,
    )
