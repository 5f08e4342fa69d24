"""OSC 1.0 wire codec.

Messages carry exactly four argument types (``i``, ``f``, ``s``, ``b``).
Everything is big-endian and 4-byte aligned. Bundle timetags are kept as
the raw 64-bit NTP value and are never used for scheduling.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from typing import Union

MAX_DATAGRAM = 65507
DEFAULT_MAX_DEPTH = 8
IMMEDIATELY = 1
BUNDLE_TAG = b"#bundle\x00"

_INT32 = struct.Struct(">i")
_UINT64 = struct.Struct(">Q")
_FLOAT32 = struct.Struct(">f")
_INT_MIN, _INT_MAX = -(2**31), 2**31 - 1


class OscError(ValueError):
    """Base class for codec failures."""


class InvalidAddress(OscError):
    pass


class InvalidArgument(OscError):
    pass


class OversizeBlob(OscError):
    pass


class Oversize(OscError):
    """Encoded packet would not fit in one UDP datagram."""


class DecodeError(OscError):
    pass


class Truncated(DecodeError):
    pass


class BadAlignment(DecodeError):
    pass


class UnknownTypeTag(DecodeError):
    pass


class TrailingBytes(DecodeError):
    pass


class BadMagic(DecodeError):
    pass


class DepthExceeded(OscError):
    pass


# -- arguments ---------------------------------------------------------------


@dataclass(frozen=True)
class Int:
    value: int

    tag = "i"

    def __post_init__(self):
        if isinstance(self.value, bool) or not isinstance(self.value, int):
            raise InvalidArgument(f"Int needs an int, got {self.value!r}")
        if not _INT_MIN <= self.value <= _INT_MAX:
            raise InvalidArgument(f"{self.value} does not fit in int32")


@dataclass(frozen=True)
class Float:
    """32-bit float argument.

    ``value`` is rounded to float32 on construction. Equality and encoding
    use the raw 4 wire bytes, so NaN payloads and negative zero survive a
    round trip exactly.
    """

    value: float
    raw: bytes = field(default=b"", repr=False)

    tag = "f"

    def __post_init__(self):
        if self.raw:
            if len(self.raw) != 4:
                raise InvalidArgument("Float raw form must be 4 bytes")
            object.__setattr__(self, "value", struct.unpack(">f", self.raw)[0])
            return
        try:
            raw = struct.pack(">f", float(self.value))
        except (OverflowError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"{self.value!r} is not a float32") from exc
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "value", struct.unpack(">f", raw)[0])

    @classmethod
    def from_bits(cls, bits: int) -> Float:
        return cls(0.0, raw=struct.pack(">I", bits))

    @property
    def bits(self) -> int:
        return struct.unpack(">I", self.raw)[0]

    def __eq__(self, other):
        if not isinstance(other, Float):
            return NotImplemented
        return self.raw == other.raw

    def __hash__(self):
        return hash(self.raw)


@dataclass(frozen=True)
class Str:
    value: str

    tag = "s"

    def __post_init__(self):
        if not isinstance(self.value, str):
            raise InvalidArgument(f"Str needs a str, got {self.value!r}")
        if "\x00" in self.value:
            raise InvalidArgument("Str may not contain NUL")


@dataclass(frozen=True)
class Blob:
    value: bytes

    tag = "b"

    def __post_init__(self):
        if not isinstance(self.value, (bytes, bytearray, memoryview)):
            raise InvalidArgument(f"Blob needs bytes, got {self.value!r}")
        object.__setattr__(self, "value", bytes(self.value))
        if len(self.value) > _INT_MAX:
            raise OversizeBlob(f"blob of {len(self.value)} bytes")


OscArg = Union[Int, Float, Str, Blob]


def as_arg(value) -> OscArg:
    """Wrap a plain Python value in the matching argument type."""
    if isinstance(value, (Int, Float, Str, Blob)):
        return value
    if isinstance(value, bool):
        raise InvalidArgument("bool has no OSC 1.0 type tag")
    if isinstance(value, int):
        return Int(value)
    if isinstance(value, float):
        return Float(value)
    if isinstance(value, str):
        return Str(value)
    if isinstance(value, (bytes, bytearray, memoryview)):
        return Blob(value)
    raise InvalidArgument(f"no OSC type for {type(value).__name__}")


_ARG_TYPES = frozenset((Int, Float, Str, Blob))


# -- packets -----------------------------------------------------------------


_BAD_ADDRESS_CHAR = re.compile(r"[\x00\s]")


def check_address(address: str) -> None:
    if not isinstance(address, str) or not address.startswith("/"):
        raise InvalidAddress(f"address must start with '/': {address!r}")
    if _BAD_ADDRESS_CHAR.search(address):
        raise InvalidAddress(f"address contains NUL or whitespace: {address!r}")


@dataclass(frozen=True)
class OscMessage:
    address: str
    args: tuple[OscArg, ...] = ()

    def __post_init__(self):
        check_address(self.address)
        args = self.args
        if type(args) is not tuple or not all(type(a) in _ARG_TYPES for a in args):
            args = tuple(as_arg(a) for a in args)
        object.__setattr__(self, "args", args)

    @classmethod
    def of(cls, address: str, *values) -> OscMessage:
        return cls(address, tuple(values))

    @property
    def values(self) -> list:
        """Plain Python values of the arguments."""
        return [a.value for a in self.args]

    @property
    def typetags(self) -> str:
        return "".join(a.tag for a in self.args)


@dataclass(frozen=True)
class OscBundle:
    timetag: int = IMMEDIATELY
    elements: tuple[OscMessage | OscBundle, ...] = ()

    def __post_init__(self):
        if not 0 <= self.timetag < 2**64:
            raise InvalidArgument(f"timetag out of range: {self.timetag}")
        elements = tuple(self.elements)
        for e in elements:
            if not isinstance(e, (OscMessage, OscBundle)):
                raise InvalidArgument(f"bundle element {e!r}")
        object.__setattr__(self, "elements", elements)

    def depth(self) -> int:
        return 1 + max((e.depth() for e in self.elements if isinstance(e, OscBundle)), default=0)

    def messages(self):
        """Yield contained messages depth-first, in order."""
        for e in self.elements:
            if isinstance(e, OscBundle):
                yield from e.messages()
            else:
                yield e


OscPacket = Union[OscMessage, OscBundle]


def timetag_from_seconds(seconds: float) -> int:
    """NTP 32.32 fixed point from seconds since 1900."""
    whole = math.floor(seconds)
    frac = int((seconds - whole) * 2**32)
    return (int(whole) << 32) | frac


def timetag_to_seconds(timetag: int) -> float:
    return (timetag >> 32) + (timetag & 0xFFFFFFFF) / 2**32


# -- encoding ----------------------------------------------------------------

_PAD = (b"", b"\x00\x00\x00", b"\x00\x00", b"\x00")


def _osc_string(text: str) -> bytes:
    raw = text.encode("utf-8")
    return raw + b"\x00" + _PAD[(len(raw) + 1) % 4]


def _encode_message(msg: OscMessage) -> bytes:
    tags = [","]
    body = []
    pack_int = _INT32.pack
    for arg in msg.args:
        tag = arg.tag
        tags.append(tag)
        if tag == "i":
            body.append(pack_int(arg.value))
        elif tag == "f":
            body.append(arg.raw)
        elif tag == "s":
            body.append(_osc_string(arg.value))
        else:
            blob = arg.value
            body.append(pack_int(len(blob)))
            body.append(blob + _PAD[len(blob) % 4])
    return _osc_string(msg.address) + _osc_string("".join(tags)) + b"".join(body)


def _encode_bundle(bundle: OscBundle, depth: int, max_depth: int) -> bytes:
    if depth > max_depth:
        raise DepthExceeded(f"bundle nesting exceeds {max_depth}")
    parts = [BUNDLE_TAG, _UINT64.pack(bundle.timetag)]
    for e in bundle.elements:
        if isinstance(e, OscBundle):
            body = _encode_bundle(e, depth + 1, max_depth)
        else:
            body = _encode_message(e)
        parts.append(_INT32.pack(len(body)))
        parts.append(body)
    return b"".join(parts)


def _checked(buf: bytes) -> bytes:
    if len(buf) > MAX_DATAGRAM:
        raise Oversize(f"{len(buf)} bytes exceeds the {MAX_DATAGRAM}-byte datagram limit")
    return buf


def encode_message(msg: OscMessage) -> bytes:
    return _checked(_encode_message(msg))


def encode_bundle(bundle: OscBundle, max_depth: int = DEFAULT_MAX_DEPTH) -> bytes:
    return _checked(_encode_bundle(bundle, 1, max_depth))


def encode_packet(packet: OscPacket, max_depth: int = DEFAULT_MAX_DEPTH) -> bytes:
    if isinstance(packet, OscBundle):
        return encode_bundle(packet, max_depth)
    return encode_message(packet)


# -- decoding ----------------------------------------------------------------


def _read_string(buf: bytes, pos: int, end: int) -> tuple[str, int]:
    nul = buf.find(b"\x00", pos, end)
    if nul < 0:
        raise Truncated(f"unterminated string at offset {pos}")
    nxt = (nul + 4) & ~3
    if nxt > end:
        raise Truncated(f"string padding runs past end at offset {pos}")
    try:
        return buf[pos:nul].decode("utf-8"), nxt
    except UnicodeDecodeError as exc:
        raise DecodeError(f"string at offset {pos} is not UTF-8") from exc


_new = object.__new__
_set = object.__setattr__


def _trusted(cls, **fields):
    # decoder output is valid by construction; skip the per-argument checks
    obj = _new(cls)
    for k, v in fields.items():
        _set(obj, k, v)
    return obj


def _decode_message(buf: bytes, pos: int, end: int) -> OscMessage:
    address, pos = _read_string(buf, pos, end)
    if pos >= end:
        raise Truncated("missing type tag string")
    tags, pos = _read_string(buf, pos, end)
    if not tags.startswith(","):
        raise UnknownTypeTag(f"type tag string must start with ',': {tags!r}")
    args: list[OscArg] = []
    append = args.append
    unpack_int = _INT32.unpack_from
    for tag in tags[1:]:
        if tag == "i":
            if pos + 4 > end:
                raise Truncated("int argument")
            append(_trusted(Int, value=unpack_int(buf, pos)[0]))
            pos += 4
        elif tag == "f":
            if pos + 4 > end:
                raise Truncated("float argument")
            raw = buf[pos:pos + 4]
            append(_trusted(Float, value=_FLOAT32.unpack(raw)[0], raw=raw))
            pos += 4
        elif tag == "s":
            text, pos = _read_string(buf, pos, end)
            append(_trusted(Str, value=text))
        elif tag == "b":
            if pos + 4 > end:
                raise Truncated("blob size")
            size = unpack_int(buf, pos)[0]
            pos += 4
            if size < 0:
                raise DecodeError(f"negative blob size {size}")
            if pos + size > end:
                raise Truncated("blob body")
            append(_trusted(Blob, value=buf[pos:pos + size]))
            pos += (size + 3) & ~3
            if pos > end:
                raise Truncated("blob padding")
        else:
            raise UnknownTypeTag(f"unsupported type tag {tag!r}")
    if pos != end:
        raise TrailingBytes(f"{end - pos} bytes after last argument")
    try:
        check_address(address)
    except InvalidAddress as exc:
        raise DecodeError(str(exc)) from exc
    return _trusted(OscMessage, address=address, args=tuple(args))


def _decode_bundle(buf: bytes, pos: int, end: int, depth: int, max_depth: int) -> OscBundle:
    if depth > max_depth:
        raise DepthExceeded(f"bundle nesting exceeds {max_depth}")
    if end - pos < 16:
        raise Truncated("bundle header")
    if buf[pos:pos + 8] != BUNDLE_TAG:
        raise BadMagic("bundle must start with '#bundle'")
    timetag = _UINT64.unpack_from(buf, pos + 8)[0]
    pos += 16
    elements: list[OscPacket] = []
    while pos < end:
        if pos + 4 > end:
            raise Truncated("bundle element size")
        size = _INT32.unpack_from(buf, pos)[0]
        pos += 4
        if size <= 0 or size % 4:
            raise BadAlignment(f"bundle element size {size}")
        if pos + size > end:
            raise Truncated("bundle element body")
        elements.append(_decode_any(buf, pos, pos + size, depth + 1, max_depth))
        pos += size
    return OscBundle(timetag, tuple(elements))


def _decode_any(buf: bytes, pos: int, end: int, depth: int, max_depth: int) -> OscPacket:
    if buf[pos:pos + 1] == b"#":
        return _decode_bundle(buf, pos, end, depth, max_depth)
    return _decode_message(buf, pos, end)


def _precheck(buf) -> bytes:
    buf = bytes(buf)
    if len(buf) % 4:
        raise BadAlignment(f"length {len(buf)} is not a multiple of 4")
    if not buf:
        raise Truncated("empty packet")
    return buf


def decode_message(buf: bytes) -> OscMessage:
    buf = _precheck(buf)
    if buf[:1] == b"#":
        raise InvalidAddress("packet is a bundle, not a message")
    return _decode_message(buf, 0, len(buf))


def decode_bundle(buf: bytes, max_depth: int = DEFAULT_MAX_DEPTH) -> OscBundle:
    buf = _precheck(buf)
    return _decode_bundle(buf, 0, len(buf), 1, max_depth)


def decode_packet(buf: bytes, max_depth: int = DEFAULT_MAX_DEPTH) -> OscPacket:
    buf = _precheck(buf)
    return _decode_any(buf, 0, len(buf), 1, max_depth)
