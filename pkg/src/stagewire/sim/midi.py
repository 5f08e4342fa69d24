"""MIDI note events to OSC messages.

Rules JSON::

    [{"channel": 10, "note": 38, "emit": {"address": "/perc/snare", "args": ["{velocity}"]}}]

Event files hold one note-on per line: ``t_ms<TAB>channel<TAB>note<TAB>velocity``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from ..cues import EmitTemplate, ParseError, RuleError, parse_emit
from ..osc import OscMessage


class MidiEvent(NamedTuple):
    channel: int
    note: int
    velocity: int
    t: float = 0.0


@dataclass(frozen=True)
class MidiBridgeRule:
    channel: int
    note: int
    emit: EmitTemplate

    def __post_init__(self):
        if not 1 <= self.channel <= 16:
            raise ValueError(f"channel {self.channel} outside 1-16")
        if not 0 <= self.note <= 127:
            raise ValueError(f"note {self.note} outside 0-127")
        bad = self.emit.placeholders - {"velocity"}
        if bad:
            raise ValueError(f"only {{velocity}} is available to MIDI rules, got {sorted(bad)}")


def midi_to_osc(rules: Iterable[MidiBridgeRule], event: MidiEvent) -> OscMessage | None:
    """First rule matching (channel, note) wins; velocity 0 is a note-off."""
    if event.velocity == 0:
        return None
    for r in rules:
        if r.channel == event.channel and r.note == event.note:
            return r.emit.render({"velocity": event.velocity})
    return None


def load_midi_rules(document: bytes | str) -> list[MidiBridgeRule]:
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(raw, list):
        raise ParseError("top level must be a list of rules")
    rules = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or item.keys() != {"channel", "note", "emit"}:
            raise ParseError("rule needs exactly channel, note, emit", field=f"[{i}]")
        try:
            rules.append(MidiBridgeRule(item["channel"], item["note"], parse_emit(item["emit"], f"[{i}].emit")))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, RuleError):
                raise
            raise ParseError(str(exc), field=f"[{i}]") from exc
    return rules


def read_midi_events(lines: Iterable[str]) -> list[MidiEvent]:
    events = []
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", line=n)
        try:
            t, ch, note, vel = float(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ParseError(str(exc), line=n) from exc
        events.append(MidiEvent(ch, note, vel, t))
    return events
