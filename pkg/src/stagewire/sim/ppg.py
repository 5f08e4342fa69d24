"""Synthetic photoplethysmogram with known beat times."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from ..pulse import PulseSample


@dataclass(frozen=True)
class PpgParams:
    """Waveform parameters.

    ``baseline_drift_amplitude`` and ``noise_rms`` are fractions of
    ``amplitude``, so scaling ``amplitude`` scales every sample exactly.
    Beats are evenly spaced at 60000/bpm ms; the first one is at
    ``phase_ms`` (half a period when left unset).
    """

    bpm: float = 60.0
    duration_ms: float = 30000.0
    sample_rate_hz: float = 100.0
    pulse_width_ms: float = 120.0
    amplitude: float = 1.0
    baseline_drift_amplitude: float = 0.0
    drift_hz: float = 0.2
    noise_rms: float = 0.0
    offset: float = 0.0
    phase_ms: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.bpm > 0:
            raise ValueError("bpm must be positive")
        if min(self.amplitude, self.baseline_drift_amplitude, self.noise_rms) < 0:
            raise ValueError("amplitudes must be >= 0")
        if not (self.sample_rate_hz > 0 and self.pulse_width_ms > 0 and self.duration_ms >= 0):
            raise ValueError("rates and durations must be positive")

    @property
    def period_ms(self) -> float:
        return 60000.0 / self.bpm


@dataclass(frozen=True)
class PpgTrace:
    samples: list[PulseSample]
    beat_times: list[float]


def pulse_shape(u: float) -> float:
    """Raised cosine of unit width centred on 0, peak 1."""
    if abs(u) >= 0.5:
        return 0.0
    return 0.5 * (1.0 + math.cos(2.0 * math.pi * u))


def pulse_rms(bpm: float, pulse_width_ms: float) -> float:
    """RMS of the noiseless unit-amplitude pulse train (pulses not overlapping)."""
    period = 60000.0 / bpm
    # mean of g^2 over one pulse is 3/8
    return math.sqrt(0.375 * min(pulse_width_ms, period) / period)


def noise_for_snr(snr_db: float, bpm: float, pulse_width_ms: float = 120.0) -> float:
    """Relative noise RMS giving the requested signal-to-noise ratio."""
    return pulse_rms(bpm, pulse_width_ms) * 10 ** (-snr_db / 20.0)


def synth_ppg(params: PpgParams) -> PpgTrace:
    p = params
    period = p.period_ms
    first = period / 2 if p.phase_ms is None else p.phase_ms
    n_beats = max(0, math.ceil((p.duration_ms - first) / period))
    beats = [first + k * period for k in range(n_beats)]
    rng = random.Random(p.seed)
    n = math.ceil(p.duration_ms * p.sample_rate_hz / 1000.0)
    half = p.pulse_width_ms / 2
    samples = []
    for i in range(n):
        t = i * 1000.0 / p.sample_rate_hz
        # only the beats whose support covers t
        k_lo = max(0, math.ceil((t - half - first) / period))
        k_hi = min(n_beats - 1, math.floor((t + half - first) / period))
        shape = 0.0
        for k in range(k_lo, k_hi + 1):
            shape += pulse_shape((t - beats[k]) / p.pulse_width_ms)
        drift = p.baseline_drift_amplitude * math.sin(2.0 * math.pi * p.drift_hz * t / 1000.0)
        noise = rng.gauss(0.0, 1.0) * p.noise_rms
        samples.append(PulseSample(t, p.amplitude * (shape + drift + noise) + p.offset))
    return PpgTrace(samples, beats)
