"""Opaque (intercept-resend) and translucent (beamsplitter) eavesdroppers.

Both attackers sit at Alice's output and use a receiver built like Bob's.
Only Eve's overall efficiency differs, and her receiver is otherwise ideal.
Eve's efficiency ``eta_E`` folds the B92 factor in, so 0.25 is a perfect
eavesdropper.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .devices import ChannelModel, DetectorModel, receive
from .photonics import PhotonNumberDistribution
from .protocol import B92_EFFICIENCY, SessionConfig, SessionResult, prepare_states, run_session


class ResendStrategy(enum.Enum):
    SINGLE_WHEN_IDENTIFIED = "single"
    DIM_PULSE = "dim"
    BRIGHT_PULSE = "bright"


BRIGHT_MIN_MEAN = 10.0


def _check_eve_efficiency(value: float) -> None:
    if not (0.0 <= value <= B92_EFFICIENCY):
        raise ValueError(f"eve_efficiency must be in [0, {B92_EFFICIENCY}], got {value}")


@dataclass(frozen=True)
class OpaqueAttackConfig:
    resend_strategy: ResendStrategy = ResendStrategy.SINGLE_WHEN_IDENTIFIED
    resend_mean: float | None = None
    eve_efficiency: float = B92_EFFICIENCY

    def __post_init__(self):
        object.__setattr__(self, "resend_strategy", ResendStrategy(self.resend_strategy))
        _check_eve_efficiency(self.eve_efficiency)
        s = self.resend_strategy
        if s is ResendStrategy.SINGLE_WHEN_IDENTIFIED:
            if self.resend_mean not in (None, 1, 1.0):
                raise ValueError("single-photon resend takes no resend_mean")
        elif self.resend_mean is None or not (math.isfinite(self.resend_mean) and self.resend_mean > 0):
            raise ValueError(f"{s.value} resend needs a positive resend_mean")
        elif s is ResendStrategy.BRIGHT_PULSE and self.resend_mean < BRIGHT_MIN_MEAN:
            raise ValueError(f"bright resend needs resend_mean >= {BRIGHT_MIN_MEAN}")


@dataclass(frozen=True)
class BeamsplitterAttackConfig:
    reflectivity: float = 0.5
    eve_efficiency: float = B92_EFFICIENCY

    def __post_init__(self):
        if not (0.0 <= self.reflectivity <= 1.0):
            raise ValueError(f"reflectivity must be in [0, 1], got {self.reflectivity}")
        _check_eve_efficiency(self.eve_efficiency)

    @property
    def transmissivity(self) -> float:
        return 1.0 - self.reflectivity


@dataclass(frozen=True)
class AttackResult:
    attack: OpaqueAttackConfig | BeamsplitterAttackConfig
    bob_session: SessionResult
    eve_conclusive_indices: np.ndarray
    eve_bits: np.ndarray
    knowledge_fraction: float  # |Eve ∩ Bob sifted| / |Bob sifted|

    @property
    def shared_with_bob(self) -> int:
        return int(np.intersect1d(self.eve_conclusive_indices, self.bob_session.sifted_indices,
                                  assume_unique=True).size)


def _eve_receiver(eve_efficiency: float, gate_window_s: float) -> tuple[ChannelModel, DetectorModel]:
    return (
        ChannelModel(coupling_efficiency=1.0, misalignment_flip_prob=0.0, background_rate_hz=0.0),
        DetectorModel(efficiency=eve_efficiency / B92_EFFICIENCY, dark_rate_hz=0.0,
                      gate_window_s=gate_window_s),
    )


def split_pulse(photons, reflectivity: float, rng: np.random.Generator):
    """Beamsplitter tap: returns (to_eve, to_bob), summing to ``photons`` exactly."""
    photons = np.asarray(photons, dtype=np.int64)
    to_eve = rng.binomial(photons, reflectivity)
    return to_eve, photons - to_eve


@dataclass
class _EveLog:
    indices: list = field(default_factory=list)
    bits: list = field(default_factory=list)

    def add(self, offset: int, local: np.ndarray, bits: np.ndarray) -> None:
        self.indices.append(local + offset)
        self.bits.append(bits)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.indices:
            return np.zeros(0, np.int64), np.zeros(0, np.uint8)
        return np.concatenate(self.indices), np.concatenate(self.bits).astype(np.uint8)


class OpaqueInterceptor:
    """Measure every pulse in Bob's bases; resend only what was identified."""

    def __init__(self, attack: OpaqueAttackConfig, gate_window_s: float):
        self.attack = attack
        self.channel, self.detector = _eve_receiver(attack.eve_efficiency, gate_window_s)
        self.log = _EveLog()
        if attack.resend_strategy is not ResendStrategy.SINGLE_WHEN_IDENTIFIED:
            self._resend = PhotonNumberDistribution(attack.resend_mean)

    def intercept(self, offset, states, photons, rng):
        clicks = receive(photons, states, self.channel, self.detector, rng)
        hit = np.flatnonzero(clicks.conclusive)
        bits = clicks.bit[hit]
        self.log.add(offset, hit, bits)

        resent = np.zeros_like(photons)
        if self.attack.resend_strategy is ResendStrategy.SINGLE_WHEN_IDENTIFIED:
            resent[hit] = 1
        else:
            resent[hit] = self._resend.sample(rng, hit.size)
        new_states = states.copy()
        new_states[hit] = prepare_states(bits)
        return new_states, resent


class BeamsplitterInterceptor:
    """Passive tap: reflect a fraction of every pulse into Eve's receiver."""

    def __init__(self, attack: BeamsplitterAttackConfig, gate_window_s: float):
        self.attack = attack
        self.channel, self.detector = _eve_receiver(attack.eve_efficiency, gate_window_s)
        self.log = _EveLog()

    def intercept(self, offset, states, photons, rng):
        to_eve, to_bob = split_pulse(photons, self.attack.reflectivity, rng)
        clicks = receive(to_eve, states, self.channel, self.detector, rng)
        hit = np.flatnonzero(clicks.conclusive)
        self.log.add(offset, hit, clicks.bit[hit])
        return states, to_bob


def run_attacked_session(session: SessionConfig,
                         attack: OpaqueAttackConfig | BeamsplitterAttackConfig) -> AttackResult:
    """Run ``session`` with Eve in line.

    Alice's bits and photon numbers come from the same seeded stream as an
    unattacked ``run_session(session)``, so the two runs form a matched pair.
    """
    gate = session.detector.gate_window_s
    if isinstance(attack, OpaqueAttackConfig):
        eve = OpaqueInterceptor(attack, gate)
    elif isinstance(attack, BeamsplitterAttackConfig):
        eve = BeamsplitterInterceptor(attack, gate)
    else:
        raise TypeError(f"unknown attack type {type(attack).__name__}")
    bob = run_session(session, interceptor=eve)
    eve_idx, eve_bits = eve.log.arrays()
    eve_idx.setflags(write=False)
    eve_bits.setflags(write=False)
    shared = np.intersect1d(eve_idx, bob.sifted_indices, assume_unique=True).size
    fraction = shared / bob.sifted_count if bob.sifted_count else 0.0
    return AttackResult(attack, bob, eve_idx, eve_bits, fraction)


def _check_split_args(mean, eta_e, eta_b, reflectivity):
    if not (math.isfinite(mean) and mean >= 0):
        raise ValueError(f"mean photon number must be >= 0, got {mean}")
    for name, v in (("eta_e", eta_e), ("eta_b", eta_b), ("reflectivity", reflectivity)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} must be in [0, 1], got {v}")


def beamsplitter_joint_probability(mean: float, eta_e: float, eta_b: float, reflectivity: float) -> float:
    """Probability that Eve and Bob both register the same pulse."""
    _check_split_args(mean, eta_e, eta_b, reflectivity)
    t = 1.0 - reflectivity
    return -math.expm1(-mean * eta_e * reflectivity) * -math.expm1(-mean * eta_b * t)


def eve_knowledge_fraction(mean: float, eta_e: float, eta_b: float, reflectivity: float) -> float:
    """Share of Bob's bits that Eve also holds under a beamsplitter tap.

    Computed as the joint probability over Bob's detection probability.
    It is checked against the factorised form ``1 - exp(-mean*eta_e*R)``.
    """
    _check_split_args(mean, eta_e, eta_b, reflectivity)
    t = 1.0 - reflectivity
    p_bob = -math.expm1(-mean * eta_b * t)
    if p_bob == 0.0:
        raise ZeroDivisionError("Bob detects nothing (zero mean, efficiency or transmission)")
    ratio = beamsplitter_joint_probability(mean, eta_e, eta_b, reflectivity) / p_bob
    direct = -math.expm1(-mean * eta_e * reflectivity)
    if abs(ratio - direct) > 1e-12:
        raise ArithmeticError(f"ratio {ratio!r} disagrees with factorised form {direct!r}")
    return ratio
