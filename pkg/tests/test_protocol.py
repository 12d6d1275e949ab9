from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsqkd.classical import ClassicalChannel, ClassicalMessage, MessageKind
from fsqkd.devices import ChannelModel, DetectionOutcome, DetectorModel, OutcomeKind
from fsqkd.photonics import AnalyzerSetting, PolarizationState
from fsqkd.protocol import (
    CHUNK,
    SessionConfig,
    alice_prepare,
    bob_choose_analyzer,
    detection_probability_series,
    expected_bit_rate,
    measure_ber,
    prepare_states,
    run_session,
    sift,
    theoretical_detection_probability,
)
from fsqkd.streams import make_rng


def test_alice_encoding():
    assert alice_prepare(0) is PolarizationState.HORIZONTAL
    assert alice_prepare(1) is PolarizationState.RIGHT_CIRCULAR
    with pytest.raises(ValueError):
        alice_prepare(2)
    assert list(prepare_states(np.array([0, 1, 1]))) == [0, 2, 2]


def test_bob_analyzer_is_fair():
    rng = make_rng(0)
    picks = [bob_choose_analyzer(rng) for _ in range(4000)]
    assert set(picks) == set(AnalyzerSetting)
    assert np.mean(picks) == pytest.approx(0.5, abs=0.03)


def test_sift_announces_only_conclusive_slots():
    outcomes = [DetectionOutcome.no_click(), DetectionOutcome.conclusive(1), DetectionOutcome.dual_fire(),
                DetectionOutcome.conclusive(0)]
    msg, idx = sift(outcomes)
    assert list(idx) == [1, 3]
    assert msg.kind is MessageKind.SIFT_ANNOUNCE and list(msg.indices) == [1, 3]
    assert msg.parities.size == 0


def test_measure_ber():
    assert measure_ber([0, 1, 1, 0], [0, 1, 0, 0]) == 0.25
    with pytest.raises(ValueError):
        measure_ber([], [])
    with pytest.raises(ValueError):
        measure_ber([0], [0, 1])


@given(st.floats(0.0, 50.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=200)
def test_closed_form_matches_photon_number_series(mu, eta, eta_d):
    p = theoretical_detection_probability(mu, eta, eta_d)
    assert p == pytest.approx(detection_probability_series(mu, eta * eta_d * 0.25), abs=1e-12)
    assert 0.0 <= p <= 1.0


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.01, 1.0))
def test_detection_probability_monotone_in_mean(a, b, eta):
    lo, hi = sorted((a, b))
    assert theoretical_detection_probability(lo, eta, 0.65) <= theoretical_detection_probability(hi, eta, 0.65)


def test_detection_probability_values():
    assert theoretical_detection_probability(0.0, 0.14, 0.65) == 0.0
    p = theoretical_detection_probability(0.1, 0.14, 0.65)
    assert p == pytest.approx(-math.expm1(-0.1 * 0.14 * 0.65 * 0.25))
    assert expected_bit_rate(20e3, p) == pytest.approx(45.4, abs=0.1)
    with pytest.raises(ValueError):
        theoretical_detection_probability(0.1, 1.4, 0.65)


def test_session_config_validation():
    for kwargs in ({"pulse_count": 0}, {"pulse_count": 1.5}, {"pulse_rate_hz": 0.0},
                   {"mean_photon_number": -1.0}, {"seed": -1}):
        with pytest.raises((ValueError, TypeError)):
            SessionConfig(**kwargs)


def test_session_is_deterministic_and_chunk_invariant():
    cfg = SessionConfig(pulse_count=CHUNK + 1234, seed=77, mean_photon_number=0.5)
    a, b = run_session(cfg), run_session(cfg)
    assert np.array_equal(a.sifted_indices, b.sifted_indices)
    assert np.array_equal(a.bob_raw_key, b.bob_raw_key)
    assert a.sifted_indices.max() < cfg.pulse_count
    assert np.all(np.diff(a.sifted_indices) > 0)


def test_session_accounting():
    res = run_session(SessionConfig(pulse_count=200_000, seed=3, mean_photon_number=1.0))
    assert res.sifted_count + res.dual_fire_count == res.click_count
    assert res.sifted_rate_hz == pytest.approx(res.sifted_count / res.config.duration_s)
    assert res.error_count == round(res.ber * res.sifted_count)
    assert list(res.announcement.indices) == list(res.sifted_indices)
    assert not res.alice_raw_key.flags.writeable


def test_empty_session_reports_nan_ber():
    dark = ChannelModel(coupling_efficiency=0.0, background_rate_hz=0.0)
    res = run_session(SessionConfig(pulse_count=1000, channel=dark, detector=DetectorModel(dark_rate_hz=0.0)))
    assert res.sifted_count == 0 and math.isnan(res.ber)


def test_trace_records():
    res = run_session(SessionConfig(pulse_count=5000, seed=8, mean_photon_number=2.0), record_slots=True)
    records = list(res.trace.records())
    assert len(records) == 5000
    conclusive = [r.slot for r in records if r.outcome.kind == OutcomeKind.CONCLUSIVE]
    assert conclusive == list(res.sifted_indices)
    assert records[10].timestamp_s == pytest.approx(10 / 20e3)
    assert all(r.state == alice_prepare(r.bit) for r in records[:100])


def test_classical_channel_transcript():
    ch = ClassicalChannel()
    ch.exchange(ClassicalMessage.parity_request(stage="block"))
    reply = ch.exchange(ClassicalMessage.parity_reply([1, 0, 1]))
    assert reply.sender == "alice" and ch.disclosed_parities() == 3
    assert [m.kind for m in ch.transcript] == [MessageKind.PARITY_REQUEST, MessageKind.PARITY_REPLY]
    with pytest.raises(ValueError):
        ClassicalMessage.parity_reply([2])
