"""Acceptance gate: one test per criterion, each with its runtime budget.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the verdict lines
are also repeated in the terminal summary of any pytest run.
"""

import random
import time

from acceptance_report import record
from oracles import brute_match, hand_message, setdiff_events
from test_osc import A_INT1, EMPTY_BUNDLE, HB, random_address, random_pattern
from test_tuio import random_frames, to_surface

from stagewire.bus import SimBus, SimNetConfig
from stagewire.osc import (
    Blob,
    DEFAULT_MAX_DEPTH,
    Float,
    Int,
    OscBundle,
    OscMessage,
    Str,
    decode_packet,
    encode_packet,
    match_address,
)
from stagewire.pipeline import run_show, show_dir
from stagewire.pulse import DetectorConfig, PulseSample, detect, estimate_bpm
from stagewire.sim.ppg import PpgParams, noise_for_snr, synth_ppg
from stagewire.tuio import Tracker


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _verdict(name, limit, check):
    """Run ``check`` (returns (ok, detail)), record and assert."""
    with Clock() as c:
        ok, detail = check()
    record(name, ok, c.elapsed, limit, detail)
    assert ok, detail
    assert c.elapsed < limit, f"{name} took {c.elapsed:.2f}s"


# -- OSC -----------------------------------------------------------------------

_ADDR_CHARS = "abcxyz019_-/"
_STR_CHARS = "abc XYZé中!{}[]*?"


def _random_arg(rng):
    k = rng.getrandbits(2)
    if k == 0:
        return Int(rng.getrandbits(32) - 2**31)
    if k == 1:
        return Float.from_bits(rng.getrandbits(32))
    if k == 2:
        return Str("".join(rng.choices(_STR_CHARS, k=rng.getrandbits(3))))
    return Blob(rng.randbytes(rng.getrandbits(4)))


def _random_message(rng):
    address = "/" + "".join(rng.choices(_ADDR_CHARS, k=rng.getrandbits(4)))
    return OscMessage(address, tuple([_random_arg(rng) for _ in range(rng.getrandbits(3))]))


def _random_packet(rng, depth=1):
    if depth > DEFAULT_MAX_DEPTH or rng.random() < 0.6:
        return _random_message(rng)
    return OscBundle(rng.getrandbits(64), tuple([_random_packet(rng, depth + 1) for _ in range(rng.getrandbits(2))]))


def test_accept_osc_roundtrip():
    def check():
        fixtures = [
            (HB, OscMessage("/hb", ()), hand_message("/hb", [])),
            (A_INT1, OscMessage("/a", (Int(1),)), hand_message("/a", [("i", 1)])),
            (EMPTY_BUNDLE, OscBundle(1, ()), None),
        ]
        for raw, obj, hand in fixtures:
            if encode_packet(obj) != raw or decode_packet(raw) != obj or (hand is not None and hand != raw):
                return False, f"fixture {raw.hex()} mismatch"
        rng = random.Random(20240501)
        bad = 0
        for _ in range(100_000):
            p = _random_packet(rng)
            buf = encode_packet(p)
            back = decode_packet(buf)
            if back != p or encode_packet(back) != buf:
                bad += 1
        return bad == 0, f"100000 packets, {bad} mismatches"

    _verdict("OSC codec round-trip", 10, check)


# -- pattern matching ----------------------------------------------------------


def test_accept_pattern_oracle():
    def check():
        rng = random.Random(4242)
        disagreements = []
        for _ in range(10_000):
            p, a = random_pattern(rng), random_address(rng)
            if match_address(p, a) != brute_match(p, a):
                disagreements.append((p, a))
        return not disagreements, f"10000 pairs, {len(disagreements)} disagreements {disagreements[:3]}"

    _verdict("Pattern-match oracle", 5, check)


# -- tracker -------------------------------------------------------------------


def test_accept_tracker_equivalence():
    def check():
        rng = random.Random(1111)
        mismatches = stale_events = 0
        for _ in range(1000):
            frames = random_frames(rng, n_frames=50, n_sessions=8)
            t = Tracker()
            last = None
            for (f, alive, updated), want in zip(frames, setdiff_events(frames)):
                got = [(e.kind.value, e.session_id) for e in t.apply_frame(to_surface(f, alive, updated))]
                mismatches += got != want
                if f != -1 and last is not None and f <= last:
                    stale_events += len(got)
                if f != -1 and (last is None or f > last):
                    last = f
        ok = mismatches == 0 and stale_events == 0
        return ok, f"1000 sequences, {mismatches} mismatching frames, {stale_events} events from stale frames"

    _verdict("Tracker equivalence", 5, check)


# -- heartbeat -----------------------------------------------------------------

MATCH_MS = 80.0


def _match_rate(truth, detected):
    """Greedy one-to-one matching within the tolerance."""
    used = set()
    hits = 0
    for b in truth:
        best = None
        for j, d in enumerate(detected):
            if j not in used and abs(d - b) <= MATCH_MS and (best is None or abs(d - b) < abs(detected[best] - b)):
                best = j
        if best is not None:
            used.add(best)
            hits += 1
    return hits / len(truth) if truth else 1.0


def test_accept_heartbeat_detection():
    cfg = DetectorConfig()

    def check():
        worst_err, worst_rate = 0.0, 1.0
        for bpm in (50, 60, 90, 120):
            for amp in (0.5, 1.0, 2.0):
                params = PpgParams(bpm=bpm, amplitude=amp, noise_rms=noise_for_snr(20, bpm), seed=bpm * 10 + int(amp * 2))
                trace = synth_ppg(params)
                events = detect(trace.samples, cfg)
                times = [e.t for e in events]
                err = abs(estimate_bpm(events) - bpm)
                truth = [b for b in trace.beat_times if b >= cfg.warmup_ms]
                rate = _match_rate(truth, times)
                worst_err, worst_rate = max(worst_err, err), min(worst_rate, rate)
                if amp == 1.0:
                    for a, c in ((3.7, 0.0), (0.25, -40.0), (1.0, 1000.0)):
                        moved = detect([PulseSample(s.t, a * s.value + c) for s in trace.samples], cfg)
                        if [e.t for e in moved] != times:
                            return False, f"invariance broken at bpm={bpm} a={a} c={c}"
        ok = worst_err <= 2 and worst_rate >= 0.95
        return ok, f"worst |bpm err|={worst_err:.3f}, worst match rate={worst_rate:.3f}"

    _verdict("Heartbeat detection", 10, check)


# -- broadcast -----------------------------------------------------------------


def _run(config, schedule, subscribers, late=None, late_at=None):
    bus = SimBus(config)
    pubs = {}
    for name in subscribers:
        bus.subscribe(name)
    for i, (t, sender, payload) in enumerate(schedule):
        if late is not None and i == late_at:
            bus.subscribe(late)
        bus.advance_to(t)
        if sender not in pubs:
            pubs[sender] = bus.publisher(sender)
        pubs[sender].publish(payload)
    bus.flush()
    names = subscribers + ([late] if late else [])
    return {n: bus.delivery_log(n) for n in names}, {n: p.config for n, p in pubs.items()}


def test_accept_broadcast_semantics():
    schedule = [(i * 2.0, f"dev{i % 4}", f"{i % 4}:{i}".encode()) for i in range(2000)]

    def check():
        subs = ["a", "b", "c"]
        logs, _ = _run(SimNetConfig(), schedule, subs)
        for name, log in logs.items():
            got = [line.split(b"\t") for line in log.splitlines()]
            if len(got) != len(schedule):
                return False, f"{name} got {len(got)} of {len(schedule)}"
            for dev in range(4):
                seq = [bytes.fromhex(p.decode()) for _, s, p in got if s == f"dev{dev}".encode()]
                want = [payload for _, s, payload in schedule if s == f"dev{dev}"]
                if seq != want:
                    return False, f"{name} out of order for dev{dev}"
        lossy = SimNetConfig(latency_ms=3, jitter_ms=2, loss_rate=0.25, seed=77)
        base_logs, base_cfg = _run(lossy, schedule, subs)
        grown_logs, grown_cfg = _run(lossy, schedule, subs, late="newcomer", late_at=1000)
        if any(base_logs[n] != grown_logs[n] for n in subs):
            return False, "late subscriber perturbed existing logs"
        if base_cfg != grown_cfg:
            return False, "publisher configuration changed"
        if len(grown_logs["newcomer"].splitlines()) >= 1000:
            return False, "late subscriber saw packets sent before it joined"
        again, _ = _run(lossy, schedule, subs)
        if again != base_logs:
            return False, "seeded lossy run not reproducible"
        return True, "3 subscribers x 2000 packets, late join at 1000, lossy seed 77 reproducible"

    _verdict("Broadcast semantics", 5, check)


# -- golden show ---------------------------------------------------------------


def test_accept_golden_show():
    def check():
        first, second = run_show(), run_show()
        golden = (show_dir() / "golden.log").read_bytes()
        ok = first == second == golden and len(first) > 0
        return ok, f"{len(first.splitlines())} emissions, runs identical={first == second}, matches golden={first == golden}"

    _verdict("End-to-end golden show", 15, check)
