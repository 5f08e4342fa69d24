"""Play the bundled show over an impaired simulated network.

    python3 scripts/run_show.py [--loss 0.1] [--jitter 5] [--latency 20] [--seed 0]

Reports how many cue emissions survive relative to the lossless golden log,
per rule. Same seed, same result.
"""

import argparse
from collections import Counter

from stagewire.bus import SimNetConfig
from stagewire.pipeline import run_show, show_dir


def per_rule(log: bytes) -> Counter:
    return Counter(line.split(b"\t")[1].decode() for line in log.splitlines())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--loss", type=float, default=0.0)
    ap.add_argument("--jitter", type=float, default=0.0)
    ap.add_argument("--latency", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    golden = per_rule((show_dir() / "golden.log").read_bytes())
    got = per_rule(run_show(net=SimNetConfig(args.latency, args.jitter, args.loss, args.seed)))
    print("rule\tgolden\tgot")
    for rule in sorted(golden):
        print(f"{rule}\t{golden[rule]}\t{got[rule]}")


if __name__ == "__main__":
    main()
