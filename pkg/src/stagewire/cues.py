"""Declarative cue rules: surface gestures, heartbeats and OSC in, cue messages out.

A rules file is a JSON list. Each rule has an ``id``, a ``match`` object
and an ``emit`` template::

    [{"id": "card7",
      "match": {"kind": "fiducial_add", "class": 4},
      "emit": {"address": "/cue/card", "args": [{"int": "{class}"}]}}]

All rules are evaluated in file order and every matching rule fires.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Union

from .osc import Float, Int, InvalidAddress, OscArg, OscMessage, Str, check_address, encode_message, match_address
from .osc.pattern import MalformedPattern, compile_pattern
from .errors import ParseError as _ParseError
from .pulse import HeartbeatEvent
from .tuio import EventKind, FiducialState, SurfaceEvent

log = logging.getLogger(__name__)

DEFAULT_MAX_RATE_HZ = 30.0


class RuleError(ValueError):
    pass


class ParseError(RuleError, _ParseError):
    pass


class InvalidRule(RuleError):
    pass


# -- argument templates --------------------------------------------------------

PLACEHOLDER_TYPES = {
    "x": "f",
    "y": "f",
    "angle": "f",
    "value": "f",
    "class": "i",
    "session": "i",
    "velocity": "i",
}
_PLACEHOLDER = re.compile(r"^\{(\w+)\}$")
_TYPE_KEYS = {"int": "i", "float": "f", "str": "s"}


@dataclass(frozen=True)
class ArgTemplate:
    """One outbound argument: a typed literal or a typed placeholder."""

    tag: str
    literal: object = None
    placeholder: str | None = None

    def render(self, values: dict) -> OscArg:
        v = values[self.placeholder] if self.placeholder else self.literal
        if self.tag == "i":
            return Int(int(v))
        if self.tag == "f":
            return Float(float(v))
        return Str(str(v))


def parse_arg_template(raw, where: str) -> ArgTemplate:
    if isinstance(raw, dict):
        if len(raw) != 1 or next(iter(raw)) not in _TYPE_KEYS:
            raise ParseError(f"typed argument needs exactly one of {sorted(_TYPE_KEYS)}", field=where)
        key, value = next(iter(raw.items()))
        tag = _TYPE_KEYS[key]
        m = _PLACEHOLDER.match(value) if isinstance(value, str) else None
        if m and tag != "s":
            return ArgTemplate(tag, placeholder=_known_placeholder(m.group(1), where))
        if m:
            return ArgTemplate("s", placeholder=_known_placeholder(m.group(1), where))
        try:
            if tag == "i":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError
                Int(value)
            elif tag == "f":
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise TypeError
                Float(float(value))
            else:
                Str(value)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad {key} literal {value!r}", field=where) from exc
        return ArgTemplate(tag, literal=value)
    if isinstance(raw, bool) or raw is None:
        raise ParseError(f"unsupported argument {raw!r}", field=where)
    if isinstance(raw, int):
        return parse_arg_template({"int": raw}, where)
    if isinstance(raw, float):
        return parse_arg_template({"float": raw}, where)
    if isinstance(raw, str):
        m = _PLACEHOLDER.match(raw)
        if m:
            name = _known_placeholder(m.group(1), where)
            return ArgTemplate(PLACEHOLDER_TYPES[name], placeholder=name)
        return parse_arg_template({"str": raw}, where)
    raise ParseError(f"unsupported argument {raw!r}", field=where)


def _known_placeholder(name: str, where: str) -> str:
    if name not in PLACEHOLDER_TYPES:
        raise ParseError(f"unknown placeholder {{{name}}}", field=where)
    return name


@dataclass(frozen=True)
class EmitTemplate:
    address: str
    args: tuple[ArgTemplate, ...] = ()

    @property
    def placeholders(self) -> set[str]:
        return {a.placeholder for a in self.args if a.placeholder}

    def render(self, values: dict) -> OscMessage:
        return OscMessage(self.address, tuple(a.render(values) for a in self.args))


def parse_emit(raw, where: str) -> EmitTemplate:
    _expect_keys(raw, {"address"}, {"args"}, where)
    address = raw["address"]
    try:
        check_address(address)
    except InvalidAddress as exc:
        raise InvalidRule(f"{where}.address: {exc}") from exc
    args = raw.get("args", [])
    if not isinstance(args, list):
        raise ParseError("args must be a list", field=f"{where}.args")
    return EmitTemplate(address, tuple(parse_arg_template(a, f"{where}.args[{i}]") for i, a in enumerate(args)))


def _expect_keys(raw, required: set, optional: set, where: str) -> None:
    if not isinstance(raw, dict):
        raise ParseError("expected an object", field=where)
    missing = required - raw.keys()
    if missing:
        raise ParseError(f"missing field(s) {sorted(missing)}", field=where)
    unknown = raw.keys() - required - optional
    if unknown:
        raise ParseError(f"unknown field(s) {sorted(unknown)}", field=where)


# -- rules ---------------------------------------------------------------------


@dataclass(frozen=True)
class FiducialAdd:
    class_id: int


@dataclass(frozen=True)
class FiducialRemove:
    class_id: int


@dataclass(frozen=True)
class RegionEnter:
    class_id: int
    rect: tuple[float, float, float, float]

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.rect
        return x0 <= x <= x1 and y0 <= y <= y1


@dataclass(frozen=True)
class Heartbeat:
    pass


@dataclass(frozen=True)
class OscMatch:
    pattern: str


@dataclass(frozen=True)
class Continuous:
    class_id: int
    axis: str
    in_range: tuple[float, float]
    out_range: tuple[float, float]
    max_rate_hz: float = DEFAULT_MAX_RATE_HZ

    def map(self, raw: float) -> float:
        a, b = self.in_range
        c, d = self.out_range
        u = min(max((raw - a) / (b - a), 0.0), 1.0)
        if u == 1.0:
            return d
        # clamping keeps rounding from overshooting the far end
        return min(max(c + (d - c) * u, min(c, d)), max(c, d))

    @property
    def spacing_ms(self) -> float:
        return 1000.0 / self.max_rate_hz


Match = Union[FiducialAdd, FiducialRemove, RegionEnter, Heartbeat, OscMatch, Continuous]

_SURFACE_PLACEHOLDERS = {"x", "y", "angle", "class", "session"}
_ALLOWED = {
    FiducialAdd: _SURFACE_PLACEHOLDERS,
    FiducialRemove: _SURFACE_PLACEHOLDERS,
    RegionEnter: _SURFACE_PLACEHOLDERS,
    Continuous: _SURFACE_PLACEHOLDERS | {"value"},
    Heartbeat: {"value"},
    OscMatch: {"value"},
}


@dataclass(frozen=True)
class CueRule:
    id: str
    match: Match
    emit: EmitTemplate


@dataclass(frozen=True)
class CueEmission:
    t: float
    rule_id: str
    message: OscMessage

    def log_line(self) -> str:
        return f"{self.t:.3f}\t{self.rule_id}\t{encode_message(self.message).hex()}\n"


def _number(raw, where: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)) or not math.isfinite(raw):
        raise ParseError(f"expected a finite number, got {raw!r}", field=where)
    return float(raw)


def _class_id(raw, where: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int) or raw < 0:
        raise ParseError(f"class must be a non-negative integer, got {raw!r}", field=where)
    return raw


def _pair(raw, where: str) -> tuple[float, float]:
    if not isinstance(raw, list) or len(raw) != 2:
        raise ParseError("expected [low, high]", field=where)
    return (_number(raw[0], f"{where}[0]"), _number(raw[1], f"{where}[1]"))


def parse_match(raw, where: str) -> Match:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ParseError("match needs a kind", field=where)
    kind = raw["kind"]
    if kind in ("fiducial_add", "fiducial_remove"):
        _expect_keys(raw, {"kind", "class"}, set(), where)
        cls = FiducialAdd if kind == "fiducial_add" else FiducialRemove
        return cls(_class_id(raw["class"], f"{where}.class"))
    if kind == "region_enter":
        _expect_keys(raw, {"kind", "class", "rect"}, set(), where)
        rect = raw["rect"]
        if not isinstance(rect, list) or len(rect) != 4:
            raise ParseError("rect must be [x0, y0, x1, y1]", field=f"{where}.rect")
        r = tuple(_number(v, f"{where}.rect[{i}]") for i, v in enumerate(rect))
        if not (r[0] < r[2] and r[1] < r[3]):
            raise InvalidRule(f"{where}.rect must satisfy x0 < x1 and y0 < y1, got {list(r)}")
        return RegionEnter(_class_id(raw["class"], f"{where}.class"), r)
    if kind == "heartbeat":
        _expect_keys(raw, {"kind"}, set(), where)
        return Heartbeat()
    if kind == "osc":
        _expect_keys(raw, {"kind", "pattern"}, set(), where)
        pattern = raw["pattern"]
        if not isinstance(pattern, str) or not pattern.startswith("/"):
            raise InvalidRule(f"{where}.pattern must start with '/'")
        try:
            compile_pattern(pattern)
        except MalformedPattern as exc:
            raise InvalidRule(f"{where}.pattern: {exc}") from exc
        return OscMatch(pattern)
    if kind == "continuous":
        _expect_keys(raw, {"kind", "class", "axis", "in", "out"}, {"max_rate_hz"}, where)
        axis = raw["axis"]
        if axis not in ("x", "y", "angle"):
            raise InvalidRule(f"{where}.axis must be x, y or angle, got {axis!r}")
        in_range = _pair(raw["in"], f"{where}.in")
        if in_range[0] == in_range[1]:
            raise InvalidRule(f"{where}.in is degenerate: {list(in_range)}")
        rate = _number(raw.get("max_rate_hz", DEFAULT_MAX_RATE_HZ), f"{where}.max_rate_hz")
        if rate <= 0:
            raise InvalidRule(f"{where}.max_rate_hz must be positive")
        return Continuous(_class_id(raw["class"], f"{where}.class"), axis, in_range, _pair(raw["out"], f"{where}.out"), rate)
    raise ParseError(f"unknown match kind {kind!r}", field=f"{where}.kind")


def load_rules(document: bytes | str) -> list[CueRule]:
    """Parse and validate a rules document; rule order is file order."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("rules file is not UTF-8") from exc
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(raw, list):
        raise ParseError("top level must be a list of rules")
    rules = []
    seen = set()
    for i, item in enumerate(raw):
        where = f"[{i}]"
        _expect_keys(item, {"id", "match", "emit"}, set(), where)
        rule_id = item["id"]
        if not isinstance(rule_id, str) or not rule_id:
            raise ParseError("id must be a non-empty string", field=f"{where}.id")
        if rule_id in seen:
            raise InvalidRule(f"duplicate rule id {rule_id!r}")
        seen.add(rule_id)
        match = parse_match(item["match"], f"{where}.match")
        emit = parse_emit(item["emit"], f"{where}.emit")
        bad = emit.placeholders - _ALLOWED[type(match)]
        if bad:
            raise InvalidRule(f"rule {rule_id!r}: placeholder(s) {sorted(bad)} not available for {item['match']['kind']}")
        rules.append(CueRule(rule_id, match, emit))
    return rules


def load_rules_file(path) -> list[CueRule]:
    with open(path, "rb") as fh:
        return load_rules(fh.read())


# -- engine --------------------------------------------------------------------


def _surface_values(state: FiducialState) -> dict:
    return {
        "x": state.x,
        "y": state.y,
        "angle": state.angle,
        "class": state.class_id,
        "session": state.session_id,
    }


def _first_number(msg: OscMessage):
    for a in msg.args:
        if isinstance(a, (Int, Float)):
            return a.value
    return None


@dataclass
class CueEngine:
    """Single-owner rule evaluator. Feed it events in arrival order."""

    rules: list[CueRule]
    _fired: set = field(default_factory=set, repr=False)
    _inside: set = field(default_factory=set, repr=False)
    _last_emit: dict = field(default_factory=dict, repr=False)
    _pending: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_document(cls, document: bytes | str) -> CueEngine:
        return cls(load_rules(document))

    def eval_event(self, event, t: float) -> list[CueEmission]:
        if isinstance(event, SurfaceEvent):
            return self._surface(event, t)
        if isinstance(event, HeartbeatEvent):
            values = {"value": event.strength}
            return [self._emit(r, values, t) for r in self.rules if isinstance(r.match, Heartbeat)]
        if isinstance(event, OscMessage):
            out = []
            for r in self.rules:
                if isinstance(r.match, OscMatch) and match_address(r.match.pattern, event.address):
                    if "value" in r.emit.placeholders:
                        v = _first_number(event)
                        if v is None:
                            log.warning("rule %s: %s has no numeric argument for {value}", r.id, event.address)
                            continue
                        out.append(self._emit(r, {"value": v}, t))
                    else:
                        out.append(self._emit(r, {}, t))
            return out
        raise TypeError(f"cannot evaluate {type(event).__name__}")

    def _surface(self, ev: SurfaceEvent, t: float) -> list[CueEmission]:
        s = ev.state
        sid = s.session_id
        values = _surface_values(s)
        out = []
        for i, r in enumerate(self.rules):
            m = r.match
            key = (i, sid)
            if isinstance(m, FiducialAdd):
                if ev.kind is EventKind.ADD and s.class_id == m.class_id and key not in self._fired:
                    self._fired.add(key)
                    out.append(self._emit(r, values, t))
                elif ev.kind is EventKind.REMOVE:
                    self._fired.discard(key)
            elif isinstance(m, FiducialRemove):
                if ev.kind is EventKind.REMOVE and s.class_id == m.class_id:
                    out.append(self._emit(r, values, t))
            elif isinstance(m, RegionEnter):
                if ev.kind is EventKind.REMOVE or s.class_id != m.class_id:
                    self._inside.discard(key)
                elif m.contains(s.x, s.y):
                    if key not in self._inside:
                        self._inside.add(key)
                        out.append(self._emit(r, values, t))
                else:
                    self._inside.discard(key)
            elif isinstance(m, Continuous) and ev.kind is EventKind.REMOVE:
                self._last_emit.pop(key, None)
                self._pending.pop(key, None)
        return out

    def eval_frame_continuous(self, state: FiducialState, t: float) -> list[CueEmission]:
        """Map a tracked object's pose through every matching continuous rule.

        Emissions for one (rule, session) are at least ``1000/max_rate_hz``
        ms apart; a rate-limited pose is held and goes out on the next
        allowed call or :meth:`flush`.
        """
        out = []
        for i, r in enumerate(self.rules):
            m = r.match
            if not isinstance(m, Continuous) or state.class_id != m.class_id:
                continue
            key = (i, state.session_id)
            last = self._last_emit.get(key)
            if last is not None and t - last < m.spacing_ms:
                self._pending[key] = state
                continue
            self._pending.pop(key, None)
            out.append(self._continuous(i, r, state, t))
        return out

    def flush(self, t: float) -> list[CueEmission]:
        """Emit held continuous values whose spacing has elapsed by ``t``."""
        out = []
        for key in sorted(self._pending):
            i, _ = key
            r = self.rules[i]
            if t - self._last_emit[key] >= r.match.spacing_ms:
                out.append(self._continuous(i, r, self._pending.pop(key), t))
        return out

    def _continuous(self, i: int, r: CueRule, state: FiducialState, t: float) -> CueEmission:
        m = r.match
        raw = getattr(state, m.axis)
        values = _surface_values(state)
        values["value"] = m.map(raw)
        self._last_emit[(i, state.session_id)] = t
        return self._emit(r, values, t)

    def handle(self, event, t: float) -> list[CueEmission]:
        """Discrete rules, then continuous rules for surface adds/updates."""
        out = self.eval_event(event, t)
        if isinstance(event, SurfaceEvent) and event.kind is not EventKind.REMOVE:
            out += self.eval_frame_continuous(event.state, t)
        return out

    def _emit(self, rule: CueRule, values: dict, t: float) -> CueEmission:
        return CueEmission(t, rule.id, rule.emit.render(values))


def eval_event(engine: CueEngine, event, t: float) -> list[CueEmission]:
    return engine.eval_event(event, t)


def eval_frame_continuous(engine: CueEngine, state: FiducialState, t: float) -> list[CueEmission]:
    return engine.eval_frame_continuous(state, t)


def emission_log(emissions) -> bytes:
    return "".join(e.log_line() for e in emissions).encode()
