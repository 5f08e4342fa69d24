from .codec import (
    BUNDLE_TAG,
    DEFAULT_MAX_DEPTH,
    IMMEDIATELY,
    MAX_DATAGRAM,
    BadAlignment,
    BadMagic,
    Blob,
    DecodeError,
    DepthExceeded,
    Float,
    Int,
    InvalidAddress,
    InvalidArgument,
    OscArg,
    OscBundle,
    OscError,
    OscMessage,
    OscPacket,
    Oversize,
    OversizeBlob,
    Str,
    TrailingBytes,
    Truncated,
    UnknownTypeTag,
    as_arg,
    check_address,
    decode_bundle,
    decode_message,
    decode_packet,
    encode_bundle,
    encode_message,
    encode_packet,
    timetag_from_seconds,
    timetag_to_seconds,
)
from .pattern import MalformedPattern, compile_pattern, match_address
