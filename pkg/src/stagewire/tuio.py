"""TUIO 1.1 ``/tuio/2Dobj`` profile: frame parsing, encoding and session tracking."""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field

from .osc import Float, Int, OscBundle, OscMessage, Str

ADDRESS = "/tuio/2Dobj"
DEFAULT_PORT = 3333
TWO_PI = 2 * math.pi
UNKNOWN_CLASS = -1


class TuioError(ValueError):
    pass


class NotTuio(TuioError):
    pass


class MalformedRow(TuioError):
    pass


class MissingFseq(TuioError):
    pass


class InconsistentAlive(MalformedRow):
    """A set row names a session that is not in the alive list."""


class InvariantViolation(TuioError):
    pass


def _f32(v: float) -> float:
    return struct.unpack(">f", struct.pack(">f", v))[0]


def _norm_angle(a: float) -> float:
    a = _f32(a % TWO_PI)
    # float32 rounding can land exactly on 2*pi
    return 0.0 if a >= TWO_PI else a


@dataclass(frozen=True)
class FiducialState:
    """One tagged object on the surface.

    Floats are stored at float32 precision, the resolution they have on the
    wire, so a state survives encode/parse unchanged. The angle is wrapped
    into [0, 2*pi). Ranges are checked by :meth:`validate`, not here, so
    that slightly out-of-range sender data can still be represented.
    """

    session_id: int
    class_id: int
    x: float = 0.0
    y: float = 0.0
    angle: float = 0.0
    vel_x: float = 0.0
    vel_y: float = 0.0
    vel_rot: float = 0.0
    accel_motion: float = 0.0
    accel_rot: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "vel_x", "vel_y", "vel_rot", "accel_motion", "accel_rot"):
            object.__setattr__(self, name, _f32(getattr(self, name)))
        object.__setattr__(self, "angle", _norm_angle(self.angle))

    def validate(self) -> None:
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise InvariantViolation(f"session {self.session_id}: position ({self.x}, {self.y}) outside [0,1]")
        if self.session_id < 0 or self.class_id < 0:
            raise InvariantViolation(f"negative id in {self}")
        if not all(map(math.isfinite, (self.vel_x, self.vel_y, self.vel_rot, self.accel_motion, self.accel_rot))):
            raise InvariantViolation(f"non-finite kinematics in {self}")


@dataclass(frozen=True)
class SurfaceFrame:
    fseq: int
    alive: frozenset[int] = frozenset()
    states: tuple[FiducialState, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alive", frozenset(self.alive))
        object.__setattr__(self, "states", tuple(self.states))

    def check(self) -> None:
        for s in self.states:
            if s.session_id not in self.alive:
                raise InconsistentAlive(f"set row for session {s.session_id} not in alive {sorted(self.alive)}")


class EventKind(enum.Enum):
    ADD = "add"
    UPDATE = "update"
    REMOVE = "remove"


@dataclass(frozen=True)
class SurfaceEvent:
    kind: EventKind
    state: FiducialState
    frame: int

    @property
    def session_id(self) -> int:
        return self.state.session_id


# -- wire ----------------------------------------------------------------------


def _ints(args, what):
    if not all(isinstance(a, Int) for a in args):
        raise MalformedRow(f"{what} expects int arguments")
    return [a.value for a in args]


def parse_2dobj_bundle(bundle: OscBundle) -> SurfaceFrame:
    """Turn one reacTIVision-style bundle into a :class:`SurfaceFrame`."""
    alive = None
    fseq = None
    rows: dict[int, FiducialState] = {}
    for msg in bundle.messages():
        if msg.address != ADDRESS:
            raise NotTuio(f"unexpected address {msg.address!r}")
        if not msg.args or not isinstance(msg.args[0], Str):
            raise NotTuio("2Dobj message without a command string")
        cmd, rest = msg.args[0].value, msg.args[1:]
        if cmd == "alive":
            alive = _ints(rest, "alive")
        elif cmd == "set":
            if (
                len(rest) != 10
                or not all(isinstance(a, Int) for a in rest[:2])
                or not all(isinstance(a, Float) for a in rest[2:])
            ):
                raise MalformedRow(f"set needs 2 ints + 8 floats, got ,{''.join(a.tag for a in rest)}")
            v = [a.value for a in rest]
            # reacTIVision occasionally reports positions a hair outside the unit square
            x, y = min(max(v[2], 0.0), 1.0), min(max(v[3], 0.0), 1.0)
            rows[v[0]] = FiducialState(v[0], v[1], x, y, *v[4:])
        elif cmd == "fseq":
            vals = _ints(rest, "fseq")
            if len(vals) != 1:
                raise MalformedRow("fseq takes exactly one int")
            fseq = vals[0]
        elif cmd == "source":
            continue
        else:
            raise NotTuio(f"unknown 2Dobj command {cmd!r}")
    if fseq is None:
        raise MissingFseq("bundle has no fseq message")
    if alive is None:
        alive = []
    frame = SurfaceFrame(fseq, frozenset(alive), tuple(rows.values()))
    frame.check()
    return frame


def encode_2dobj_frame(frame: SurfaceFrame, source: str | None = None) -> OscBundle:
    """Inverse of :func:`parse_2dobj_bundle`: alive, set rows, then fseq."""
    frame.check()
    if not -(2**31) <= frame.fseq < 2**31:
        raise InvariantViolation(f"fseq {frame.fseq} does not fit in int32")
    msgs = []
    if source is not None:
        msgs.append(OscMessage(ADDRESS, (Str("source"), Str(source))))
    msgs.append(OscMessage(ADDRESS, (Str("alive"), *(Int(s) for s in sorted(frame.alive)))))
    for s in frame.states:
        s.validate()
        msgs.append(
            OscMessage(
                ADDRESS,
                (
                    Str("set"),
                    Int(s.session_id),
                    Int(s.class_id),
                    *(Float(v) for v in (s.x, s.y, s.angle, s.vel_x, s.vel_y, s.vel_rot, s.accel_motion, s.accel_rot)),
                ),
            )
        )
    msgs.append(OscMessage(ADDRESS, (Str("fseq"), Int(frame.fseq))))
    return OscBundle(1, tuple(msgs))


# -- session tracking ----------------------------------------------------------


@dataclass
class Tracker:
    """Session state for one TUIO stream.

    Frames whose fseq is not newer than the last accepted one are dropped;
    fseq -1 frames are keep-alives and change nothing.
    """

    sessions: dict[int, FiducialState] = field(default_factory=dict)
    last_fseq: int | None = None

    def apply_frame(self, frame: SurfaceFrame) -> list[SurfaceEvent]:
        if frame.fseq == -1:
            return []
        if self.last_fseq is not None and frame.fseq <= self.last_fseq:
            return []
        self.last_fseq = frame.fseq
        rows = {s.session_id: s for s in frame.states}
        events = []
        for sid in sorted(self.sessions.keys() - frame.alive):
            events.append(SurfaceEvent(EventKind.REMOVE, self.sessions.pop(sid), frame.fseq))
        added = sorted(frame.alive - self.sessions.keys())
        for sid in added:
            state = rows.get(sid) or FiducialState(sid, UNKNOWN_CLASS)
            self.sessions[sid] = state
            events.append(SurfaceEvent(EventKind.ADD, state, frame.fseq))
        for sid in sorted(rows.keys() - set(added)):
            self.sessions[sid] = rows[sid]
            events.append(SurfaceEvent(EventKind.UPDATE, rows[sid], frame.fseq))
        return events

    def reset(self) -> None:
        """Forget everything, e.g. after the tracker source restarted."""
        self.sessions.clear()
        self.last_fseq = None


def apply_frame(tracker: Tracker, frame: SurfaceFrame) -> list[SurfaceEvent]:
    return tracker.apply_frame(frame)
