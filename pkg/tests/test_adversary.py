from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fsqkd.adversary import (
    BeamsplitterAttackConfig,
    OpaqueAttackConfig,
    ResendStrategy,
    beamsplitter_joint_probability,
    eve_knowledge_fraction,
    run_attacked_session,
    split_pulse,
)
from fsqkd.protocol import SessionConfig, run_session
from fsqkd.streams import make_rng

ETA_B = 0.14 * 0.65 * 0.25


def test_attack_config_validation():
    with pytest.raises(ValueError):
        OpaqueAttackConfig(ResendStrategy.BRIGHT_PULSE, resend_mean=2.0)
    with pytest.raises(ValueError):
        OpaqueAttackConfig(ResendStrategy.DIM_PULSE)
    with pytest.raises(ValueError):
        OpaqueAttackConfig(eve_efficiency=0.3)
    with pytest.raises(ValueError):
        BeamsplitterAttackConfig(reflectivity=1.2)
    assert OpaqueAttackConfig("dim", 0.5).resend_strategy is ResendStrategy.DIM_PULSE
    assert BeamsplitterAttackConfig(0.3).transmissivity == pytest.approx(0.7)


@given(st.integers(0, 100), st.floats(0.0, 1.0))
def test_split_conserves_photons(n, r):
    eve, bob = split_pulse(np.full(50, n), r, make_rng(n))
    assert np.all(eve + bob == n) and np.all(eve >= 0) and np.all(bob >= 0)


@given(st.floats(0.0, 5.0), st.floats(0.0, 0.25), st.floats(0.001, 1.0), st.floats(0.0, 0.999))
def test_knowledge_fraction_factorises(mu, eta_e, eta_b, r):
    if mu * eta_b * (1 - r) == 0:
        return
    f = eve_knowledge_fraction(mu, eta_e, eta_b, r)
    assert f == pytest.approx(-math.expm1(-mu * eta_e * r), abs=1e-12)
    assert 0.0 <= f <= 1.0


def test_knowledge_fraction_values_and_errors():
    assert eve_knowledge_fraction(0.1, 0.25, ETA_B, 0.9999) == pytest.approx(0.024688, abs=1e-6)
    assert beamsplitter_joint_probability(0.1, 0.25, ETA_B, 0.0) == 0.0
    with pytest.raises(ZeroDivisionError):
        eve_knowledge_fraction(0.1, 0.25, ETA_B, 1.0)
    with pytest.raises(ValueError):
        eve_knowledge_fraction(-0.1, 0.25, ETA_B, 0.5)


def test_attacked_run_shares_alice_stream():
    session = SessionConfig(pulse_count=300_000, seed=21)
    base = run_session(session)
    att = run_attacked_session(session, BeamsplitterAttackConfig(0.0))
    # R = 0 leaves Bob's pulses untouched, but Eve's stream is still drawn,
    # so only Alice's side must coincide.
    assert att.knowledge_fraction == 0.0
    assert att.bob_session.sifted_count == pytest.approx(base.sifted_count, rel=0.1)


def test_eve_bits_match_alice():
    session = SessionConfig(pulse_count=500_000, seed=22, mean_photon_number=1.0)
    att = run_attacked_session(session, BeamsplitterAttackConfig(0.5))
    bob = att.bob_session
    # Eve's ideal receiver never mis-reads; Alice's bits are known on Bob's sifted slots.
    alice = dict(zip(bob.sifted_indices.tolist(), bob.alice_raw_key.tolist()))
    eve = dict(zip(att.eve_conclusive_indices.tolist(), att.eve_bits.tolist()))
    shared = [i for i in eve if i in alice]
    assert shared
    assert all(eve[i] == alice[i] for i in shared)
    assert att.shared_with_bob == len(shared)
    assert att.knowledge_fraction == pytest.approx(len(shared) / bob.sifted_count)


def test_opaque_single_resend_signature():
    session = SessionConfig(pulse_count=1_000_000, seed=23)
    base = run_session(session)
    att = run_attacked_session(session, OpaqueAttackConfig())
    bob = att.bob_session
    # Eve forwards only what she identified; other Bob clicks must be noise.
    outside = np.count_nonzero(~np.isin(bob.sifted_indices, att.eve_conclusive_indices))
    assert outside <= bob.background_click_count + bob.dark_click_count
    assert bob.sifted_count < 0.5 * base.sifted_count
    assert att.knowledge_fraction > 0.9


def test_bright_resend_signature():
    session = SessionConfig(pulse_count=200_000, seed=24)
    base = run_session(session)
    att = run_attacked_session(session, OpaqueAttackConfig("bright", 1000.0))
    assert att.bob_session.dual_fire_count > base.dual_fire_count + 100


def test_strong_tap_starves_bob():
    session = SessionConfig(pulse_count=1_000_000, seed=25)
    att = run_attacked_session(session, BeamsplitterAttackConfig(0.9999))
    base = run_session(session)
    assert att.bob_session.sifted_count < 0.01 * base.sifted_count
