"""Scripted object choreography rendered as a stream of TUIO frames.

Script JSON::

    {"frame_rate_hz": 30, "duration_ms": 4000,
     "actions": [
       {"type": "place", "t_ms": 0, "session": 1, "class": 4, "x": 0.2, "y": 0.2, "angle": 0},
       {"type": "move", "t_ms_start": 500, "t_ms_end": 1500, "session": 1, "x": 0.8, "y": 0.5, "angle": 3.1},
       {"type": "lift", "t_ms": 2000, "session": 1}]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from ..tuio import FiducialState, SurfaceFrame

TWO_PI = 2 * math.pi


class ScriptInvalid(ValueError):
    pass


@dataclass(frozen=True)
class Place:
    t_ms: float
    session: int
    class_id: int
    x: float
    y: float
    angle: float = 0.0


@dataclass(frozen=True)
class MoveTo:
    t_ms_start: float
    t_ms_end: float
    session: int
    x: float
    y: float
    angle: float = 0.0


@dataclass(frozen=True)
class Lift:
    t_ms: float
    session: int


Action = Place | MoveTo | Lift


@dataclass(frozen=True)
class ChoreographyScript:
    actions: tuple = ()
    frame_rate_hz: float = 30.0
    duration_ms: float | None = None

    @property
    def period_ms(self) -> float:
        return 1000.0 / self.frame_rate_hz

    @property
    def end_ms(self) -> float:
        """Frames are produced for tick times strictly before this."""
        if self.duration_ms is not None:
            return self.duration_ms
        last = max((a.t_ms_end if isinstance(a, MoveTo) else a.t_ms for a in self.actions), default=0.0)
        return last + self.period_ms


def _check_unit(v, what):
    if not 0.0 <= v <= 1.0:
        raise ScriptInvalid(f"{what}={v} outside [0, 1]")


def validate(script: ChoreographyScript) -> None:
    if not script.frame_rate_hz > 0:
        raise ScriptInvalid("frame_rate_hz must be positive")
    placed: dict[int, float] = {}
    lifted: dict[int, float] = {}
    moves: dict[int, list[tuple[float, float]]] = {}
    for a in script.actions:
        if isinstance(a, Place):
            if a.session in placed:
                raise ScriptInvalid(f"session {a.session} placed twice")
            if a.session < 0 or a.class_id < 0:
                raise ScriptInvalid(f"negative id in {a}")
            _check_unit(a.x, "x")
            _check_unit(a.y, "y")
            placed[a.session] = a.t_ms
        elif isinstance(a, Lift):
            if a.session in lifted:
                raise ScriptInvalid(f"session {a.session} lifted twice")
            lifted[a.session] = a.t_ms
        elif isinstance(a, MoveTo):
            if not a.t_ms_end > a.t_ms_start:
                raise ScriptInvalid(f"move for session {a.session} ends before it starts")
            _check_unit(a.x, "x")
            _check_unit(a.y, "y")
            moves.setdefault(a.session, []).append((a.t_ms_start, a.t_ms_end))
        else:
            raise ScriptInvalid(f"unknown action {a!r}")
    for sid, t in lifted.items():
        if sid not in placed or t <= placed[sid]:
            raise ScriptInvalid(f"session {sid} lifted before being placed")
    for sid, spans in moves.items():
        if sid not in placed:
            raise ScriptInvalid(f"session {sid} moved before being placed")
        spans.sort()
        if spans[0][0] < placed[sid] or (sid in lifted and spans[-1][1] > lifted[sid]):
            raise ScriptInvalid(f"move for session {sid} outside its placement")
        for (_, e0), (s1, _) in zip(spans, spans[1:]):
            if s1 < e0:
                raise ScriptInvalid(f"overlapping moves for session {sid}")


@dataclass
class _Track:
    place: Place
    lift_t: float
    moves: list = field(default_factory=list)

    def pose(self, t: float) -> tuple[float, float, float]:
        x, y, a = self.place.x, self.place.y, self.place.angle % TWO_PI
        for m in self.moves:
            if t < m.t_ms_start:
                break
            frac = min((t - m.t_ms_start) / (m.t_ms_end - m.t_ms_start), 1.0)
            turn = (m.angle - a + math.pi) % TWO_PI - math.pi
            x, y, a = x + (m.x - x) * frac, y + (m.y - y) * frac, (a + turn * frac) % TWO_PI
        return x, y, a


def run_choreography(script: ChoreographyScript) -> list[tuple[float, SurfaceFrame]]:
    """One frame per tick, fseq from 1.

    A session is alive from the first tick at or after its place time up to
    the last tick before its lift time. Set rows go out on placement and
    whenever the pose changed since the last row.
    """
    validate(script)
    tracks: dict[int, _Track] = {}
    for a in script.actions:
        if isinstance(a, Place):
            tracks[a.session] = _Track(a, math.inf)
    for a in script.actions:
        if isinstance(a, Lift):
            tracks[a.session].lift_t = a.t_ms
        elif isinstance(a, MoveTo):
            tracks[a.session].moves.append(a)
    for tr in tracks.values():
        tr.moves.sort(key=lambda m: m.t_ms_start)

    period = script.period_ms
    end = script.end_ms
    last_row: dict[int, tuple[float, FiducialState]] = {}
    frames = []
    i = 0
    while (t := i * period) < end:
        alive = set()
        rows = []
        for sid in sorted(tracks):
            tr = tracks[sid]
            if not tr.place.t_ms <= t < tr.lift_t:
                last_row.pop(sid, None)
                continue
            alive.add(sid)
            x, y, a = tr.pose(t)
            prev = last_row.get(sid)
            state = FiducialState(sid, tr.place.class_id, x, y, a)
            if prev is not None:
                before = prev[1]
                if (before.x, before.y, before.angle) == (state.x, state.y, state.angle):
                    continue
                dt = (t - prev[0]) / 1000.0
                turn = (state.angle - before.angle + math.pi) % TWO_PI - math.pi
                state = FiducialState(
                    sid, tr.place.class_id, x, y, a, (state.x - before.x) / dt, (state.y - before.y) / dt, turn / dt
                )
            last_row[sid] = (t, state)
            rows.append(state)
        frames.append((t, SurfaceFrame(i + 1, frozenset(alive), tuple(rows))))
        i += 1
    return frames


# -- JSON ----------------------------------------------------------------------

_FIELDS = {
    "place": ({"type", "t_ms", "session", "class", "x", "y"}, {"angle"}),
    "move": ({"type", "t_ms_start", "t_ms_end", "session", "x", "y"}, {"angle"}),
    "lift": ({"type", "t_ms", "session"}, set()),
}


def _action(raw: dict, i: int):
    kind = raw.get("type") if isinstance(raw, dict) else None
    if kind not in _FIELDS:
        raise ScriptInvalid(f"action {i}: unknown type {kind!r}")
    required, optional = _FIELDS[kind]
    if required - raw.keys() or raw.keys() - required - optional:
        raise ScriptInvalid(f"action {i}: fields must be {sorted(required)} (+ {sorted(optional)})")
    if kind == "place":
        return Place(raw["t_ms"], raw["session"], raw["class"], raw["x"], raw["y"], raw.get("angle", 0.0))
    if kind == "move":
        return MoveTo(raw["t_ms_start"], raw["t_ms_end"], raw["session"], raw["x"], raw["y"], raw.get("angle", 0.0))
    return Lift(raw["t_ms"], raw["session"])


def load_script(document: bytes | str) -> ChoreographyScript:
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ScriptInvalid(f"line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict) or raw.keys() - {"frame_rate_hz", "duration_ms", "actions"}:
        raise ScriptInvalid("script must be an object with frame_rate_hz, duration_ms, actions")
    actions = tuple(_action(a, i) for i, a in enumerate(raw.get("actions", [])))
    script = ChoreographyScript(actions, raw.get("frame_rate_hz", 30.0), raw.get("duration_ms"))
    validate(script)
    return script


def load_script_file(path) -> ChoreographyScript:
    with open(path, "rb") as fh:
        return load_script(fh.read())
