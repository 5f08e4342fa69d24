"""Command-line tools: capture, replay, simulate, detect, route and relay OSC traffic.

Every command runs unattended and exits nonzero on error.
"""

from __future__ import annotations

import argparse
import logging
import socket
import sys
import time
from pathlib import Path

from .bus import BusError, Endpoint, SimNetConfig, default_broadcast, open_udp_listener
from .cues import CueEngine, RuleError, load_rules_file
from .errors import ParseError
from .osc import OscError, OscMessage, decode_packet, encode_bundle, encode_message
from .pipeline import PPG_ADDRESS, Router, run_show, show_dir
from .pulse import DetectorConfig, InsufficientEvents, PulseError, PulseSample, detect, estimate_bpm
from .sim.choreography import ScriptInvalid, load_script_file, run_choreography
from .sim.midi import load_midi_rules, midi_to_osc, read_midi_events
from .trace import TracePacket, iter_trace, read_samples
from .tuio import encode_2dobj_frame

log = logging.getLogger("stagewire")

EXIT_OK, EXIT_ERROR = 0, 1


class CommandError(Exception):
    pass


# -- helpers -------------------------------------------------------------------


def _endpoint(text: str | None) -> Endpoint:
    if text is None:
        return default_broadcast()
    ep = Endpoint.parse(text)
    if ep.transport != "udp":
        raise CommandError(f"{text}: only HOST:PORT targets work from the command line")
    return ep


def _sender() -> socket.socket:
    s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    s.setsockopt(socket.SOL_SOCKET, socket.SO_BROADCAST, 1)
    return s


def _describe(packet: bytes) -> str:
    try:
        decoded = decode_packet(packet)
    except OscError as exc:
        return f"!{type(exc).__name__}: {exc}"
    return _summary(decoded)


def _summary(p) -> str:
    if isinstance(p, OscMessage):
        return " ".join([p.address, p.typetags] + [repr(v) for v in p.values])
    return "#bundle[" + "; ".join(_summary(e) for e in p.elements) + "]"


class _Paced:
    """Sleeps so that offsets (ms, scaled by 1/speed) land on the wall clock."""

    def __init__(self, speed: float):
        if not speed > 0:
            raise CommandError("--speed must be positive")
        self.speed = speed
        self.start = time.monotonic()

    def wait_until(self, t_ms: float) -> None:
        delay = self.start + t_ms / 1000.0 / self.speed - time.monotonic()
        if delay > 0:
            time.sleep(delay)


def _listen_loop(sock: socket.socket, count: int | None, duration: float | None):
    """Yield (t_ms since first datagram, payload, sender) until a limit is hit.

    Yields None on idle polls so callers can do housekeeping.
    """
    print(f"listening on udp/{sock.getsockname()[1]}", file=sys.stderr, flush=True)
    sock.settimeout(0.05)
    started = time.monotonic()
    first = None
    n = 0
    while count is None or n < count:
        if duration is not None and time.monotonic() - started >= duration:
            return
        try:
            data, addr = sock.recvfrom(65535)
        except socket.timeout:
            yield None
            continue
        now = time.monotonic()
        first = now if first is None else first
        n += 1
        yield int((now - first) * 1000), data, addr


# -- commands ------------------------------------------------------------------


def cmd_sniff(args) -> int:
    sock = open_udp_listener(args.port, shared=args.shared)
    try:
        out = open(args.out, "w", encoding="utf-8") if args.out != "-" else None
    except OSError as exc:
        sock.close()
        raise CommandError(f"cannot write {args.out}: {exc}") from exc
    try:
        for got in _listen_loop(sock, args.count, args.duration):
            if got is None:
                continue
            t_ms, data, _ = got
            line = TracePacket(t_ms, "in", data).line()
            try:
                if out is not None:
                    out.write(line)
                    out.flush()
            except OSError as exc:
                raise CommandError(f"write to {args.out} failed: {exc}") from exc
            print(f"{t_ms}\t{len(data)}B\t{_describe(data)}", flush=True)
    finally:
        sock.close()
        if out is not None:
            out.close()
    return EXIT_OK


def cmd_replay(args) -> int:
    target = _endpoint(args.to)
    with open(args.trace, encoding="utf-8") as fh:
        packets = [p for p in iter_trace(fh) if args.direction in ("any", p.direction)]
    s = _sender()
    try:
        clock = _Paced(args.speed)
        t0 = packets[0].t_ms if packets else 0
        for p in packets:
            clock.wait_until(p.t_ms - t0)
            s.sendto(p.payload, target.addr)
    finally:
        s.close()
    return EXIT_OK


def _read_detect_input(path: str) -> list[PulseSample]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    first = next((ln for ln in lines if ln.strip() and not ln.startswith("#")), "")
    if first.count("\t") != 2:
        return read_samples(lines)
    samples = []
    for p in iter_trace(lines):
        try:
            msg = decode_packet(p.payload)
        except OscError:
            continue
        if isinstance(msg, OscMessage) and msg.address == PPG_ADDRESS and msg.args:
            samples.append(PulseSample(float(p.t_ms), float(msg.args[0].value)))
    return samples


def cmd_detect(args) -> int:
    cfg = DetectorConfig().with_overrides(
        sample_rate_hz=args.rate,
        window_ms=args.window,
        gain=args.gain,
        baseline_halflife_ms=args.halflife,
        refractory_ms=args.refractory,
        warmup_ms=args.warmup,
        floor=args.floor,
        invert=args.invert or None,
    )
    events = detect(_read_detect_input(args.file), cfg)
    for e in events:
        print(f"{e.t:g}\t{e.strength:.6g}")
    try:
        print(f"bpm\t{estimate_bpm(events, window_beats=args.window_beats):.2f}")
    except InsufficientEvents:
        print("bpm\tno estimate")
    return EXIT_OK


def cmd_simulate(args) -> int:
    script = load_script_file(args.script)
    target = _endpoint(args.to)
    frames = run_choreography(script)
    s = _sender()
    try:
        clock = _Paced(args.speed)
        for t, frame in frames:
            if not args.fast:
                clock.wait_until(t)
            s.sendto(encode_bundle(encode_2dobj_frame(frame, source=args.source)), target.addr)
    finally:
        s.close()
    return EXIT_OK


def cmd_bridge(args) -> int:
    rules = load_midi_rules(Path(args.rules).read_bytes())
    with open(args.events, encoding="utf-8") as fh:
        events = read_midi_events(fh)
    target = _endpoint(args.to)
    s = _sender()
    try:
        clock = _Paced(args.speed)
        for ev in events:
            msg = midi_to_osc(rules, ev)
            if msg is None:
                continue
            if not args.fast:
                clock.wait_until(ev.t)
            s.sendto(encode_message(msg), target.addr)
    finally:
        s.close()
    return EXIT_OK


def cmd_route(args) -> int:
    router = Router(CueEngine(load_rules_file(args.rules)))
    target = _endpoint(args.to)
    sock = open_udp_listener(args.listen, shared=not args.exclusive)
    s = _sender()
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None
    started = time.monotonic()

    def send(emissions):
        for e in emissions:
            s.sendto(encode_message(e.message), target.addr)
            line = e.log_line()
            sys.stdout.write(line)
            if log_fh:
                log_fh.write(line)
        sys.stdout.flush()

    try:
        for got in _listen_loop(sock, args.count, args.duration):
            now = (time.monotonic() - started) * 1000.0
            if got is None:
                send(router.engine.flush(now))
            else:
                send(router.handle_datagram(got[1], now))
        # held continuous values go out once their spacing has passed
        send(router.engine.flush((time.monotonic() - started) * 1000.0 + 1000.0))
    finally:
        sock.close()
        s.close()
        if log_fh:
            log_fh.close()
    return EXIT_OK


def cmd_relay(args) -> int:
    targets = [_endpoint(t) for t in args.to.split(",") if t]
    if not targets:
        raise CommandError("--to needs at least one HOST:PORT")
    sock = open_udp_listener(args.listen, shared=not args.exclusive)
    s = _sender()
    try:
        for got in _listen_loop(sock, args.count, args.duration):
            if got is None:
                continue
            for t in targets:
                s.sendto(got[1], t.addr)
    finally:
        sock.close()
        s.close()
    return EXIT_OK


def cmd_show(args) -> int:
    d = Path(args.dir) if args.dir else show_dir()
    net = SimNetConfig(latency_ms=args.latency, jitter_ms=args.jitter, loss_rate=args.loss, seed=args.seed)
    got = run_show(d, net)
    if args.out:
        Path(args.out).write_bytes(got)
    else:
        sys.stdout.write(got.decode())
    if args.check:
        golden = (d / "golden.log").read_bytes()
        if golden != got:
            print("emission log differs from golden.log", file=sys.stderr)
            return EXIT_ERROR
        print("emission log matches golden.log", file=sys.stderr)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _limits(p):
    p.add_argument("--count", type=int, help="stop after this many datagrams")
    p.add_argument("--duration", type=float, help="stop after this many seconds")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stagewire", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sniff", help="capture datagrams to a trace file")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--out", required=True, help="trace file, or - for stdout decode only")
    p.add_argument("--shared", action="store_true", help="share the port with other listeners")
    _limits(p)
    p.set_defaults(func=cmd_sniff)

    p = sub.add_parser("replay", help="re-send a trace at its recorded timing")
    p.add_argument("trace")
    p.add_argument("--to")
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--direction", choices=("in", "out", "any"), default="any")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("detect", help="offline heartbeat detection")
    p.add_argument("file", help="samples file (t_ms<TAB>value) or trace of /lmtd/ppg messages")
    p.add_argument("--rate", type=float)
    p.add_argument("--window", type=float)
    p.add_argument("--gain", type=float)
    p.add_argument("--halflife", type=float)
    p.add_argument("--refractory", type=float)
    p.add_argument("--warmup", type=float)
    p.add_argument("--floor", type=float)
    p.add_argument("--invert", action="store_true")
    p.add_argument("--window-beats", type=int, default=5)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="stream a choreography script as TUIO")
    p.add_argument("script")
    p.add_argument("--to")
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--fast", action="store_true", help="send without pacing")
    p.add_argument("--source", help="TUIO source name")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bridge", help="turn a MIDI note file into OSC")
    p.add_argument("events")
    p.add_argument("--rules", required=True)
    p.add_argument("--to")
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--fast", action="store_true")
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("route", help="run the cue engine on live traffic")
    p.add_argument("rules")
    p.add_argument("--listen", type=int, required=True)
    p.add_argument("--to")
    p.add_argument("--log", help="also write the emission log here")
    p.add_argument("--exclusive", action="store_true")
    _limits(p)
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("relay", help="rebroadcast datagrams to several targets")
    p.add_argument("--listen", type=int, required=True)
    p.add_argument("--to", required=True, help="HOST:PORT[,HOST:PORT...]")
    p.add_argument("--exclusive", action="store_true")
    _limits(p)
    p.set_defaults(func=cmd_relay)

    p = sub.add_parser("show", help="run the bundled show offline and print its emission log")
    p.add_argument("--dir", help="show directory (default: the bundled one)")
    p.add_argument("--out")
    p.add_argument("--check", action="store_true", help="compare with golden.log")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--latency", type=float, default=0.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--loss", type=float, default=0.0)
    p.set_defaults(func=cmd_show)
    return ap


HANDLED = (CommandError, ParseError, RuleError, ScriptInvalid, PulseError, BusError, OscError, OSError, ValueError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_OK
    except HANDLED as exc:
        print(f"stagewire {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
