"""Regenerate the bundled show's PPG fixture and golden emission log.

    python3 scripts/make_fixtures.py [--check]

With --check nothing is written; the exit status says whether the files on
disk match what would be generated.
"""

import argparse
import io
import sys

from stagewire.pipeline import run_show, show_dir
from stagewire.sim.ppg import PpgParams, noise_for_snr, synth_ppg
from stagewire.trace import write_samples

PPG = PpgParams(
    bpm=60,
    duration_ms=30000,
    baseline_drift_amplitude=0.2,
    noise_rms=noise_for_snr(20.0, 60),
    offset=512.0,
    seed=2024,
)


def ppg_text() -> str:
    buf = io.StringIO()
    write_samples(synth_ppg(PPG).samples, buf)
    return buf.getvalue()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args(argv)
    d = show_dir()
    ppg = ppg_text()
    stale = []
    if not (d / "ppg.tsv").exists() or (d / "ppg.tsv").read_text() != ppg:
        stale.append("ppg.tsv")
        if not args.check:
            (d / "ppg.tsv").write_text(ppg)
    golden = run_show(d)
    if not (d / "golden.log").exists() or (d / "golden.log").read_bytes() != golden:
        stale.append("golden.log")
        if not args.check:
            (d / "golden.log").write_bytes(golden)
    for name in stale:
        print(("stale: " if args.check else "wrote: ") + name)
    return 1 if args.check and stale else 0


if __name__ == "__main__":
    sys.exit(main())
