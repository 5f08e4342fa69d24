"""Heartbeat detection from a sampled opacity signal.

A beat is a sharp rise in opacity. The detector sums the sample-to-sample
changes over a short window (which collapses to ``s[n] - s[n-w]``) and fires
when that sum exceeds ``gain`` times a running average of its own magnitude.
Because the threshold is relative to the signal's own activity, no per-user
calibration is needed: scaling or offsetting the input leaves the event
sequence unchanged.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

HEARTBEAT_ADDRESS = "/lmtd/heartbeat"


class PulseError(ValueError):
    pass


class InsufficientHistory(PulseError):
    pass


class NonMonotonicTime(PulseError):
    pass


class InsufficientEvents(PulseError):
    pass


@dataclass(frozen=True)
class PulseSample:
    t: float  # ms since stream start
    value: float


@dataclass(frozen=True)
class HeartbeatEvent:
    t: float
    strength: float


@dataclass(frozen=True)
class DetectorConfig:
    sample_rate_hz: float = 100.0
    window_ms: float = 150.0
    gain: float = 3.0
    baseline_halflife_ms: float = 2000.0
    refractory_ms: float = 250.0
    warmup_ms: float = 2000.0
    floor: float = 0.0
    invert: bool = False

    def __post_init__(self):
        for name in ("sample_rate_hz", "window_ms", "gain", "baseline_halflife_ms", "refractory_ms", "warmup_ms"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.floor >= 0:
            raise ValueError(f"floor must be >= 0, got {self.floor}")

    @property
    def window_samples(self) -> int:
        return max(1, round(self.window_ms * self.sample_rate_hz / 1000.0))

    @property
    def max_bpm(self) -> float:
        return 60000.0 / self.refractory_ms

    def with_overrides(self, **kw) -> DetectorConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def windowed_delta(samples: Sequence[float], n: int, w: int) -> float:
    """Sum of the last ``w`` first differences ending at index ``n``."""
    if w < 1 or n < w or n >= len(samples):
        raise InsufficientHistory(f"need {w} samples of history before index {n}")
    return samples[n] - samples[n - w]


class PulseDetector:
    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()
        self._w = self.config.window_samples
        self._history: deque[float] = deque(maxlen=self._w + 1)
        self.baseline = 0.0
        self.last_t: float | None = None
        self.last_beat_t: float | None = None
        self.beats = 0

    def process_sample(self, sample: PulseSample) -> HeartbeatEvent | None:
        cfg = self.config
        if self.last_t is not None and sample.t <= self.last_t:
            raise NonMonotonicTime(f"sample at {sample.t} ms after {self.last_t} ms")
        dt = None if self.last_t is None else sample.t - self.last_t
        self.last_t = sample.t
        self._history.append(-sample.value if cfg.invert else sample.value)
        if len(self._history) <= self._w:
            return None

        delta = windowed_delta(self._history, self._w, self._w)
        b = self.baseline
        event = None
        if (
            delta > cfg.gain * b
            and delta > cfg.floor
            and sample.t >= cfg.warmup_ms
            and (self.last_beat_t is None or sample.t - self.last_beat_t >= cfg.refractory_ms)
        ):
            self.last_beat_t = sample.t
            self.beats += 1
            event = HeartbeatEvent(sample.t, delta)
        alpha = 1.0 - math.pow(0.5, dt / cfg.baseline_halflife_ms)
        self.baseline = b + alpha * (abs(delta) - b)
        return event

    def run(self, samples: Iterable[PulseSample]) -> list[HeartbeatEvent]:
        return [e for s in samples if (e := self.process_sample(s)) is not None]


def process_sample(detector: PulseDetector, sample: PulseSample) -> HeartbeatEvent | None:
    return detector.process_sample(sample)


def detect(samples: Iterable[PulseSample], config: DetectorConfig | None = None) -> list[HeartbeatEvent]:
    return PulseDetector(config).run(samples)


def estimate_bpm(events: Sequence[HeartbeatEvent | float], window_beats: int = 5) -> float:
    """Rate from the mean of the last few inter-beat intervals."""
    times = [e.t if isinstance(e, HeartbeatEvent) else float(e) for e in events]
    if len(times) < 2:
        raise InsufficientEvents(f"need at least 2 beats, got {len(times)}")
    k = min(window_beats, len(times) - 1)
    mean_ibi = (times[-1] - times[-1 - k]) / k
    return 60000.0 / mean_ibi
