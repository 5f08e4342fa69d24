import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stagewire.pulse import (
    DetectorConfig,
    HeartbeatEvent,
    InsufficientEvents,
    InsufficientHistory,
    NonMonotonicTime,
    PulseDetector,
    PulseSample,
    detect,
    estimate_bpm,
    windowed_delta,
)
from stagewire.sim.ppg import PpgParams, noise_for_snr, synth_ppg


def literal_sum(s, n, w):
    total = 0.0
    for i in range(n - w + 1, n + 1):
        total += s[i] - s[i - 1]
    return total


def test_windowed_delta_examples():
    assert windowed_delta([5.0] * 10, 9, 3) == 0
    assert windowed_delta([0, 1, 2, 3], 3, 3) == 3
    with pytest.raises(InsufficientHistory):
        windowed_delta([0, 1, 2], 1, 3)


def test_windowed_delta_telescopes_on_random_signal():
    rng = random.Random(3)
    s = [rng.uniform(-500, 500) for _ in range(1000)]
    for w in (1, 5, 15, 99):
        for n in range(w, len(s)):
            assert abs(windowed_delta(s, n, w) - literal_sum(s, n, w)) <= 1e-9


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60), st.data())
def test_telescoping_property(s, data):
    w = data.draw(st.integers(1, len(s) - 1))
    n = data.draw(st.integers(w, len(s) - 1))
    assert windowed_delta(s, n, w) == pytest.approx(literal_sum(s, n, w), abs=1e-9)


def samples_from(values, rate=100.0):
    return [PulseSample(i * 1000.0 / rate, v) for i, v in enumerate(values)]


def test_constant_signal_is_silent():
    assert detect(samples_from([512.0] * 6000)) == []


def test_non_monotonic_time():
    d = PulseDetector()
    d.process_sample(PulseSample(10, 1))
    with pytest.raises(NonMonotonicTime):
        d.process_sample(PulseSample(10, 2))


def test_60bpm_synthetic_run():
    trace = synth_ppg(PpgParams(bpm=60, duration_ms=30000, noise_rms=noise_for_snr(20, 60), seed=1))
    events = detect(trace.samples)
    assert 28 <= len(events) <= 31
    ibis = [b.t - a.t for a, b in zip(events, events[1:])]
    assert abs(sum(ibis) / len(ibis) - 1000) <= 20
    assert abs(estimate_bpm(events) - 60) <= 2


def test_scaling_by_two_gives_identical_timestamps():
    trace = synth_ppg(PpgParams(bpm=60, noise_rms=noise_for_snr(20, 60), seed=4))
    doubled = [PulseSample(s.t, 2.0 * s.value) for s in trace.samples]
    assert [e.t for e in detect(trace.samples)] == [e.t for e in detect(doubled)]


@given(
    st.floats(0.1, 10.0),
    st.floats(-1000.0, 1000.0),
    st.sampled_from([50, 60, 90, 120]),
    st.integers(0, 2**16),
)
@settings(max_examples=25, deadline=None)
def test_scale_offset_invariance(a, c, bpm, seed):
    trace = synth_ppg(PpgParams(bpm=bpm, duration_ms=10000, noise_rms=noise_for_snr(20, bpm), seed=seed))
    base = [e.t for e in detect(trace.samples)]
    moved = [PulseSample(s.t, a * s.value + c) for s in trace.samples]
    assert [e.t for e in detect(moved)] == base


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=800), st.floats(1, 400))
@settings(max_examples=60, deadline=None)
def test_refractory_holds_for_any_input(values, refractory):
    cfg = DetectorConfig(refractory_ms=refractory, warmup_ms=1)
    events = detect(samples_from(values), cfg)
    for a, b in zip(events, events[1:]):
        assert b.t - a.t >= refractory


@given(st.floats(-1e4, 1e4), st.integers(1, 3000))
@settings(max_examples=30, deadline=None)
def test_silence(level, n):
    assert detect(samples_from([level] * n), DetectorConfig(warmup_ms=1)) == []


def test_floor_suppresses_small_beats():
    trace = synth_ppg(PpgParams(bpm=60, amplitude=0.5, seed=2))
    assert detect(trace.samples, DetectorConfig(floor=10.0)) == []
    assert detect(trace.samples, DetectorConfig(floor=0.1))


def test_inverted_polarity():
    trace = synth_ppg(PpgParams(bpm=60, noise_rms=noise_for_snr(20, 60), seed=8))
    flipped = [PulseSample(s.t, -s.value) for s in trace.samples]
    assert [e.t for e in detect(flipped, DetectorConfig(invert=True))] == [e.t for e in detect(trace.samples)]


def test_warmup_blocks_early_beats():
    trace = synth_ppg(PpgParams(bpm=90, seed=0))
    assert all(e.t >= 2000 for e in detect(trace.samples))


def test_config_validation():
    with pytest.raises(ValueError):
        DetectorConfig(gain=0)
    with pytest.raises(ValueError):
        DetectorConfig(floor=-1)
    assert DetectorConfig().window_samples == 15
    assert DetectorConfig().max_bpm == 240


# -- bpm estimate ------------------------------------------------------------


def test_estimate_bpm_examples():
    assert estimate_bpm([HeartbeatEvent(t, 1.0) for t in (0, 1000, 2000)]) == 60.0
    assert estimate_bpm([HeartbeatEvent(0, 1.0), HeartbeatEvent(500, 1.0)]) == 120.0
    with pytest.raises(InsufficientEvents):
        estimate_bpm([HeartbeatEvent(0, 1.0)])


def test_estimate_uses_last_window_only():
    times = [0, 400, 800] + [800 + 1000 * k for k in range(1, 6)]
    assert estimate_bpm(times, window_beats=5) == 60.0
    assert estimate_bpm(times, window_beats=7) != 60.0
