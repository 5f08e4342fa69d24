"""Detector accuracy over heart rate, amplitude, drift and noise.

    python3 scripts/ppg_sweep.py [--seeds 3] [--snr 20] [--bpm 40 50 60 90 120 150 180]

Prints one row per condition: beats after warm-up, matched within the
tolerance, spurious detections, BPM error and the detection lead/lag range
relative to the pulse peak.
"""

import argparse
from dataclasses import dataclass

from stagewire.pulse import DetectorConfig, InsufficientEvents, detect, estimate_bpm
from stagewire.sim.ppg import PpgParams, noise_for_snr, synth_ppg


@dataclass(frozen=True)
class SweepConfig:
    bpms: tuple = (40, 50, 60, 90, 120, 150, 180)
    amplitudes: tuple = (0.5, 1.0, 2.0)
    drifts: tuple = (0.0, 0.2)
    snr_db: float = 20.0
    seeds: int = 3
    tolerance_ms: float = 80.0


def score(truth, detected, tol):
    matched, offsets = 0, []
    for b in truth:
        near = [d - b for d in detected if abs(d - b) <= tol]
        if near:
            matched += 1
            offsets.append(min(near, key=abs))
    spurious = sum(1 for d in detected if not any(abs(d - b) <= tol for b in truth))
    return matched, spurious, offsets


def run(cfg: SweepConfig, detector: DetectorConfig):
    print("bpm\tamp\tdrift\tseed\tbeats\tmatched\tspurious\tbpm_err\toffset_ms")
    for bpm in cfg.bpms:
        for amp in cfg.amplitudes:
            for drift in cfg.drifts:
                for seed in range(cfg.seeds):
                    params = PpgParams(
                        bpm=bpm,
                        amplitude=amp,
                        baseline_drift_amplitude=drift,
                        noise_rms=noise_for_snr(cfg.snr_db, bpm),
                        seed=seed,
                    )
                    trace = synth_ppg(params)
                    events = detect(trace.samples, detector)
                    truth = [b for b in trace.beat_times if b >= detector.warmup_ms]
                    matched, spurious, offs = score(truth, [e.t for e in events], cfg.tolerance_ms)
                    try:
                        err = f"{estimate_bpm(events) - bpm:+.2f}"
                    except InsufficientEvents:
                        err = "n/a"
                    span = f"{min(offs):.0f}..{max(offs):.0f}" if offs else "-"
                    print(f"{bpm}\t{amp}\t{drift}\t{seed}\t{len(truth)}\t{matched}\t{spurious}\t{err}\t{span}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--snr", type=float, default=20.0)
    ap.add_argument("--bpm", type=int, nargs="+")
    ap.add_argument("--gain", type=float)
    ap.add_argument("--window", type=float)
    args = ap.parse_args(argv)
    cfg = SweepConfig(seeds=args.seeds, snr_db=args.snr)
    if args.bpm:
        cfg = SweepConfig(bpms=tuple(args.bpm), seeds=args.seeds, snr_db=args.snr)
    run(cfg, DetectorConfig().with_overrides(gain=args.gain, window_ms=args.window))


if __name__ == "__main__":
    main()
