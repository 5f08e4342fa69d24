import math
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stagewire.osc import (
    BadAlignment,
    BadMagic,
    Blob,
    DecodeError,
    DepthExceeded,
    Float,
    Int,
    InvalidAddress,
    InvalidArgument,
    MalformedPattern,
    OscBundle,
    OscMessage,
    Oversize,
    Str,
    TrailingBytes,
    Truncated,
    UnknownTypeTag,
    decode_bundle,
    decode_message,
    decode_packet,
    encode_bundle,
    encode_message,
    match_address,
    timetag_from_seconds,
    timetag_to_seconds,
)

from oracles import brute_match, hand_message

# -- frozen byte fixtures ----------------------------------------------------

HB = bytes.fromhex("2F686200 2C000000")
A_INT1 = bytes.fromhex("2F610000 2C690000 00000001")
EMPTY_BUNDLE = bytes.fromhex("2362756E 646C6500 00000000 00000001")


def test_fixtures_agree_with_hand_encoder():
    assert hand_message("/hb", []) == HB
    assert hand_message("/a", [("i", 1)]) == A_INT1
    assert EMPTY_BUNDLE == b"#bundle\x00" + bytes(7) + b"\x01"


def test_encode_fixtures():
    assert encode_message(OscMessage("/hb")) == HB
    assert encode_message(OscMessage("/a", (Int(1),))) == A_INT1
    assert encode_bundle(OscBundle(1)) == EMPTY_BUNDLE


def test_decode_fixtures():
    assert decode_message(HB) == OscMessage("/hb")
    assert decode_message(A_INT1) == OscMessage.of("/a", 1)
    assert decode_bundle(EMPTY_BUNDLE) == OscBundle(1, ())


@pytest.mark.parametrize(
    "address,args",
    [
        ("/x", [("f", 0.5), ("s", "hi"), ("b", b"\x01\x02\x03")]),
        ("/tuio/2Dobj", [("s", "set"), ("i", 3), ("i", -4), ("f", -1.25)]),
        ("/abc", [("s", ""), ("b", b""), ("s", "abcd")]),
        ("/n", [("i", -(2**31)), ("i", 2**31 - 1)]),
    ],
)
def test_encoder_matches_hand_layout(address, args):
    wrap = {"i": Int, "f": Float, "s": Str, "b": Blob}
    msg = OscMessage(address, tuple(wrap[t](v) for t, v in args))
    assert encode_message(msg) == hand_message(address, args)


# -- errors --------------------------------------------------------------------


@pytest.mark.parametrize("address", ["x", "", "/a b", "/a\x00"])
def test_invalid_address(address):
    with pytest.raises(InvalidAddress):
        OscMessage(address)


def test_bad_alignment():
    with pytest.raises(BadAlignment):
        decode_message(HB[:7])


def test_unknown_type_tag():
    buf = hand_message("/d", []).replace(b",\x00\x00\x00", b",d\x00\x00") + bytes(8)
    with pytest.raises(UnknownTypeTag):
        decode_message(buf)


def test_truncated_and_trailing():
    with pytest.raises(Truncated):
        decode_message(A_INT1[:8])
    with pytest.raises(TrailingBytes):
        decode_message(A_INT1 + bytes(4))
    with pytest.raises(Truncated):
        decode_message(b"/abc")


def test_bad_magic_and_truncated_bundle():
    with pytest.raises(BadMagic):
        decode_bundle(b"#bundlX\x00" + bytes(8))
    with pytest.raises(Truncated):
        decode_bundle(EMPTY_BUNDLE[:12])
    with pytest.raises(Truncated):
        decode_bundle(EMPTY_BUNDLE + b"\x00\x00\x00\x08" + HB[:4])


def test_string_argument_rejects_nul():
    with pytest.raises(InvalidArgument):
        Str("a\x00b")


def test_int_range():
    with pytest.raises(InvalidArgument):
        Int(2**31)


def test_oversize_datagram():
    msg = OscMessage("/big", (Blob(bytes(65500)),))
    with pytest.raises(Oversize):
        encode_message(msg)


def _nest(depth):
    b = OscBundle(1, (OscMessage("/hb"),))
    for _ in range(depth - 1):
        b = OscBundle(1, (b,))
    return b


def test_depth_limit():
    eight = _nest(8)
    assert decode_bundle(encode_bundle(eight)) == eight
    with pytest.raises(DepthExceeded):
        encode_bundle(_nest(9))
    # build a 9-deep buffer by hand and make sure the decoder refuses it too
    raw = encode_bundle(_nest(8))
    wrapped = b"#bundle\x00" + bytes(7) + b"\x01" + struct.pack(">i", len(raw)) + raw
    with pytest.raises(DepthExceeded):
        decode_bundle(wrapped)
    assert decode_bundle(wrapped, max_depth=9).depth() == 9


def test_bundle_roundtrip_holding_message():
    b = OscBundle(1, (OscMessage("/hb"),))
    assert decode_bundle(encode_bundle(b)) == b
    assert decode_packet(encode_bundle(b)) == b


def test_timetag_helpers():
    tt = timetag_from_seconds(3_900_000_000.5)
    assert tt == (3_900_000_000 << 32) | (1 << 31)
    assert timetag_to_seconds(tt) == 3_900_000_000.5


# -- float bit exactness -----------------------------------------------------


@pytest.mark.parametrize("bits", [0x80000000, 0x7FC00000, 0x7FA00001, 0xFFFFFFFF, 0x00000001, 0x7F800000])
def test_float_bits_roundtrip(bits):
    msg = OscMessage("/f", (Float.from_bits(bits),))
    back = decode_message(encode_message(msg))
    assert back.args[0].bits == bits
    assert back == msg


def test_float_rounds_to_single_precision():
    f = Float(0.1)
    assert f.value == struct.unpack(">f", struct.pack(">f", 0.1))[0]
    assert decode_message(encode_message(OscMessage("/f", (f,)))).args[0] == f
    assert math.copysign(1, Float(-0.0).value) == -1


# -- property tests ------------------------------------------------------------

addresses = st.text(alphabet="abcxyz019_/-", min_size=0, max_size=12).map(lambda s: "/" + s)
osc_args = st.one_of(
    st.integers(-(2**31), 2**31 - 1).map(Int),
    st.integers(0, 2**32 - 1).map(Float.from_bits),
    st.text(st.characters(blacklist_characters="\x00", blacklist_categories=("Cs",)), max_size=10).map(Str),
    st.binary(max_size=13).map(Blob),
)
messages = st.builds(lambda a, xs: OscMessage(a, tuple(xs)), addresses, st.lists(osc_args, max_size=6))
packets = st.recursive(
    messages,
    lambda inner: st.builds(
        lambda tt, els: OscBundle(tt, tuple(els)), st.integers(0, 2**64 - 1), st.lists(inner, max_size=4)
    ),
    max_leaves=10,
)


@given(packets)
@settings(max_examples=300)
def test_roundtrip_property(packet):
    if isinstance(packet, OscBundle) and packet.depth() > 8:
        return
    buf = encode_bundle(packet) if isinstance(packet, OscBundle) else encode_message(packet)
    assert len(buf) % 4 == 0
    back = decode_packet(buf)
    assert back == packet
    assert (encode_bundle(back) if isinstance(back, OscBundle) else encode_message(back)) == buf


@given(st.binary(max_size=64))
def test_decoder_never_crashes_unexpectedly(buf):
    try:
        decode_packet(buf)
    except (DecodeError, DepthExceeded, InvalidAddress):
        pass


# -- pattern matching ----------------------------------------------------------


@pytest.mark.parametrize(
    "pattern,address,expected",
    [
        ("/cue/7", "/cue/7", True),
        ("/cue/*", "/cue/12", True),
        ("/cue/*", "/cue/1/2", False),
        ("/k/{on,off}", "/k/off", True),
        ("/k/{on,off}", "/k/of", False),
        ("/c?e", "/cue", True),
        ("/c?e", "/c/e", False),
        ("/n[0-9]", "/n5", True),
        ("/n[!0-9]", "/n5", False),
        ("/*/*", "/a/b", True),
        ("/*", "/a/b", False),
    ],
)
def test_match_examples(pattern, address, expected):
    assert match_address(pattern, address) is expected
    # the oracle only needs the address's own characters plus one outsider
    alphabet = "".join(sorted(set(address) | {"/", "z"}))
    assert brute_match(pattern, address, alphabet=alphabet) is expected


@pytest.mark.parametrize("pattern", ["/a[bc", "/a{b,c"])
def test_malformed_pattern(pattern):
    with pytest.raises(MalformedPattern):
        match_address(pattern, "/ab")


def random_pattern(rng: random.Random) -> str:
    alphabet = "ab/01"
    parts = ["/"]
    for _ in range(rng.randint(0, 4)):
        r = rng.random()
        if r < 0.4:
            parts.append(rng.choice(alphabet))
        elif r < 0.55:
            parts.append("?")
        elif r < 0.7:
            parts.append("*")
        elif r < 0.85:
            body = "".join(rng.choice("ab01-!") for _ in range(rng.randint(0, 3)))
            parts.append("[" + body + "]")
        else:
            alts = ["".join(rng.choice(alphabet) for _ in range(rng.randint(0, 2))) for _ in range(rng.randint(1, 3))]
            parts.append("{" + ",".join(alts) + "}")
    return "".join(parts)


def random_address(rng: random.Random) -> str:
    return "/" + "".join(rng.choice("ab/01") for _ in range(rng.randint(0, 5)))


def test_matcher_agrees_with_brute_force_sample():
    rng = random.Random(7)
    for _ in range(2000):
        p, a = random_pattern(rng), random_address(rng)
        assert match_address(p, a) == brute_match(p, a), (p, a)
