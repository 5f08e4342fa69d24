"""Glue between the bus and the cue engine, plus the bundled show."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .bus import SimBus, SimNetConfig
from .cues import CueEmission, CueEngine, load_rules_file, emission_log
from .osc import Float, Int, OscBundle, OscError, OscMessage, decode_packet, encode_message, encode_bundle
from .pulse import HEARTBEAT_ADDRESS, DetectorConfig, HeartbeatEvent, PulseDetector, PulseSample
from .sim.choreography import load_script_file, run_choreography
from .trace import read_samples
from .tuio import ADDRESS as TUIO_ADDRESS, Tracker, TuioError, encode_2dobj_frame, parse_2dobj_bundle

log = logging.getLogger(__name__)

# raw sensor samples carried over OSC: [Float value]
PPG_ADDRESS = "/lmtd/ppg"


def heartbeat_message(beat_index: int, event: HeartbeatEvent) -> OscMessage:
    return OscMessage(HEARTBEAT_ADDRESS, (Int(beat_index), Float(event.strength)))


def _is_tuio(bundle: OscBundle) -> bool:
    return any(m.address == TUIO_ADDRESS for m in bundle.messages())


@dataclass
class Router:
    """Turns incoming datagrams into cue emissions.

    TUIO bundles go through the tracker; heartbeat messages become
    heartbeat events; every other message is offered to the OSC rules.
    Undecodable datagrams are logged and dropped.
    """

    engine: CueEngine
    tracker: Tracker = field(default_factory=Tracker)
    dropped: int = 0

    def handle_datagram(self, packet: bytes, t: float) -> list[CueEmission]:
        out = self.engine.flush(t)
        try:
            decoded = decode_packet(packet)
            if isinstance(decoded, OscBundle) and _is_tuio(decoded):
                for ev in self.tracker.apply_frame(parse_2dobj_bundle(decoded)):
                    out += self.engine.handle(ev, t)
                return out
            msgs = decoded.messages() if isinstance(decoded, OscBundle) else [decoded]
        except (OscError, TuioError) as exc:
            self.dropped += 1
            log.warning("dropping datagram at %.3f ms: %s", t, exc)
            return out
        for m in msgs:
            out += self.engine.handle(self._message_event(m, t), t)
        return out

    @staticmethod
    def _message_event(m: OscMessage, t: float):
        if m.address == HEARTBEAT_ADDRESS and len(m.args) >= 2 and isinstance(m.args[1], (Int, Float)):
            return HeartbeatEvent(t, float(m.args[1].value))
        return m


def show_dir() -> Path:
    return Path(str(resources.files("stagewire") / "data" / "show"))


def show_schedule(directory: Path, detector: DetectorConfig | None = None) -> list[tuple[float, str, bytes]]:
    """Every datagram the show's devices send, as (t_ms, sender, payload), time ordered."""
    directory = Path(directory)
    sched = []
    for t, frame in run_choreography(load_script_file(directory / "choreography.json")):
        sched.append((t, 0, "surface", encode_bundle(encode_2dobj_frame(frame))))
    with open(directory / "ppg.tsv", encoding="utf-8") as fh:
        samples = read_samples(fh)
    det = PulseDetector(detector)
    for s in samples:
        ev = det.process_sample(s)
        if ev is not None:
            sched.append((ev.t, 1, "pulse", encode_message(heartbeat_message(det.beats, ev))))
    sched.sort(key=lambda e: (e[0], e[1]))
    return [(t, sender, p) for t, _, sender, p in sched]


def run_show(directory: Path | None = None, net: SimNetConfig | None = None) -> bytes:
    """Play the show through a simulated network and return the emission log."""
    directory = Path(directory) if directory is not None else show_dir()
    engine = CueEngine(load_rules_file(directory / "rules.json"))
    router = Router(engine)
    bus = SimBus(net)
    rx = bus.subscribe("router")
    pubs = {}
    emissions: list[CueEmission] = []

    def pump():
        while (got := rx.recv(0)) is not None:
            emissions.extend(router.handle_datagram(got[0], bus.now_ms))

    for t, sender, payload in show_schedule(directory):
        bus.advance_to(t)
        pump()
        if sender not in pubs:
            pubs[sender] = bus.publisher(sender)
        pubs[sender].publish(payload)
        pump()
    bus.flush()
    pump()
    emissions.extend(engine.flush(bus.now_ms + 1000.0))
    bus.shutdown()
    return emission_log(emissions)
