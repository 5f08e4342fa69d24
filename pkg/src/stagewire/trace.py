"""Text trace files: one datagram per line, ``t_ms<TAB>direction<TAB>hex``."""

from __future__ import annotations

import binascii
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

from .errors import ParseError
from .pulse import PulseSample

DIRECTIONS = ("in", "out")


@dataclass(frozen=True)
class TracePacket:
    t_ms: int
    direction: str
    payload: bytes

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be 'in' or 'out', got {self.direction!r}")
        if self.t_ms < 0:
            raise ValueError("t_ms must be non-negative")

    def line(self) -> str:
        return f"{self.t_ms}\t{self.direction}\t{self.payload.hex()}\n"


def parse_line(text: str, lineno: int) -> TracePacket:
    parts = text.rstrip("\r\n").split("\t")
    if len(parts) != 3:
        raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", line=lineno)
    t, direction, hexed = parts
    try:
        t_ms = int(t)
    except ValueError:
        raise ParseError(f"bad t_ms {t!r}", line=lineno) from None
    try:
        payload = binascii.unhexlify(hexed)
    except (binascii.Error, ValueError):
        raise ParseError("malformed hex payload", line=lineno) from None
    try:
        return TracePacket(t_ms, direction, payload)
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno) from None


def iter_trace(lines: Iterable[str]) -> Iterator[TracePacket]:
    """Blank lines and ``#`` comments are skipped; t_ms must not decrease."""
    last = None
    for n, text in enumerate(lines, start=1):
        if not text.strip() or text.startswith("#"):
            continue
        pkt = parse_line(text, n)
        if last is not None and pkt.t_ms < last:
            raise ParseError(f"t_ms went backwards ({pkt.t_ms} < {last})", line=n)
        last = pkt.t_ms
        yield pkt


def read_trace(path) -> list[TracePacket]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_trace(fh))


def write_trace(packets: Iterable[TracePacket], out: TextIO) -> None:
    last = None
    for p in packets:
        if last is not None and p.t_ms < last:
            raise ValueError("t_ms must be non-decreasing")
        last = p.t_ms
        out.write(p.line())


def read_samples(lines: Iterable[str]) -> list[PulseSample]:
    """Samples file: ``t_ms<TAB>value`` per line. Time order is checked by the detector."""
    out = []
    for n, text in enumerate(lines, start=1):
        if not text.strip() or text.startswith("#"):
            continue
        parts = text.rstrip("\r\n").split("\t")
        if len(parts) != 2:
            raise ParseError(f"expected t_ms<TAB>value, got {len(parts)} fields", line=n)
        try:
            out.append(PulseSample(float(parts[0]), float(parts[1])))
        except ValueError:
            raise ParseError("non-numeric field", line=n) from None
    return out


def write_samples(samples: Iterable[PulseSample], out: TextIO) -> None:
    for s in samples:
        out.write(f"{s.t:g}\t{s.value!r}\n")
