"""Packet codec tests: checksum, golden vector, round trips, corruption
detection, channel classification and the freshest-wins buffer.
"""

import base64

import numpy as np
import pytest

from teleosim.sensors import CameraFrame, NO_ECHO
from teleosim.wire import (
    ChannelClass,
    ChecksumMismatch,
    CommandKind,
    CommandMessage,
    EncodeError,
    FieldParseError,
    FieldRangeError,
    FramingError,
    LatestBuffer,
    TelemetryFrame,
    WIRE_LASER_BEAMS,
    checksum_16,
    classify,
    decode_command,
    decode_telemetry,
    encode_command,
    encode_telemetry,
    pack_media,
    subsample_laser,
    unpack_media,
)

# Golden vector: canonical frame F0 captured once from the encoder and
# hand-checked field by field (seq 7, stamp 1400, battery 12.40, sonar
# with NO_ECHO at slots 2 and 5, laser pattern with NO_ECHO every 4th).
GOLDEN_B64 = (
    "AeTFfjc6MTQwMDoxMi40MDoxLjIzNDU6LTAuNTAwMDowLjc4NTQwOjAuNTAwMDotMC4xMDAwOjQ1LjA6"
    "MC4wMDAxMDowLjAwMDIwOjAuMDQwOjEuMjUwOi0xOjQuMDAwOjIuMDAwOi0xOjAuNTAwOjMuMzMzOjU6"
    "MTI6MTk6LTE6MzM6NDA6NDc6LTE6NjE6Njg6NzU6LTE6ODk6OTY6MTAzOi0xOjExNzoxMjQ6MTMxOi0x"
    "OjE0NToxNTI6MTU5Oi0xOjE3MzoxODA6MTg3Oi0xOjIwMToyMDg6MjE1Oi0xOjIyOToyMzY6MjQzOi0x"
    "OjI1NzoyNjQ6MjcxOi0xOjI4NToyOTI6Mjk5Oi0xOjMxMzozMjA6MzI3Oi0xOjM0MTozNDg6MzU1Oi0x"
    "OjM2OTozNzY6MzgzOi0xOjM5Nzo0MDQ6NDExOi0xOjQyNTo0MzI6NDM5Oi0xOjQ1Mzo0NjA6NDY3Oi0x"
    "OjQ4MTo0ODg6NDk1Oi0xOjUwOTo1MTY6NTIzOi0xOjUzNzo1NDQ6NTUxOi0xOjU2NTo1NzI6NTc5Oi0x"
    "OjU5Mzo2MDA6NjA3Oi0xOjYyMTo2Mjg6NjM1Oi0xOjY0OTo2NTY6NjYzOi0xOjY3Nzo2ODQ6NjkxOi0x"
    "OjcwNQ=="
)
GOLDEN_BYTES = base64.b64decode(GOLDEN_B64)


def golden_frame() -> TelemetryFrame:
    laser = []
    for i in range(101):
        if i % 4 == 3:
            laser.append(NO_ECHO)
        else:
            laser.append(round((0.5 + i * 0.7) % 75.0, 1))
    return TelemetryFrame(
        seq=7, stamp_ms=1400, battery_v=12.40,
        x=1.2345, y=-0.5, theta=0.7854, v=0.5, w=-0.1,
        compass_deg=45.0, lat=0.0001, lon=0.0002,
        sonar=(0.04, 1.25, NO_ECHO, 4.0, 2.0, NO_ECHO, 0.5, 3.333),
        laser=tuple(laser),
    ).quantized()


def random_frame(rng) -> TelemetryFrame:
    """Random frame already on the wire precision grid."""
    sonar = tuple(
        NO_ECHO if rng.random() < 0.3 else round(float(rng.uniform(0.04, 4.0)), 3)
        for _ in range(8)
    )
    laser = tuple(
        NO_ECHO if rng.random() < 0.3 else round(float(rng.uniform(0.5, 80.0)), 1)
        for _ in range(WIRE_LASER_BEAMS)
    )
    return TelemetryFrame(
        seq=int(rng.integers(0, 1_000_000)),
        stamp_ms=int(rng.integers(0, 10_000_000)),
        battery_v=round(float(rng.uniform(9.0, 13.0)), 2),
        x=round(float(rng.uniform(-100, 100)), 4),
        y=round(float(rng.uniform(-100, 100)), 4),
        theta=round(float(rng.uniform(-3.14159, 3.14159)), 5),
        v=round(float(rng.uniform(-1.5, 1.5)), 4),
        w=round(float(rng.uniform(-1.0, 1.0)), 4),
        compass_deg=round(float(rng.integers(0, 3600)) / 10.0, 1),
        lat=round(float(rng.uniform(-80, 80)), 5),
        lon=round(float(rng.uniform(-170, 170)), 5),
        sonar=sonar,
        laser=laser,
    ).quantized()


def reference_checksum(data: bytes) -> int:
    """Independent one's-complement reference (numpy-based summation)."""
    if len(data) % 2:
        data = data + b"\x00"
    words = np.frombuffer(data, dtype=">u2").astype(np.uint64)
    total = int(words.sum())
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


class TestChecksum:
    def test_empty_is_all_ones(self):
        assert checksum_16(b"") == 0xFFFF

    def test_all_zero_payloads(self):
        for n in (2, 8, 64):
            assert checksum_16(b"\x00" * n) == 0xFFFF

    def test_matches_reference(self, rng):
        for _ in range(200):
            n = int(rng.integers(0, 200))
            payload = rng.integers(0, 256, n).astype(np.uint8).tobytes()
            assert checksum_16(payload) == reference_checksum(payload)

    def test_single_bit_flip_always_detected(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 80))
            payload = bytearray(rng.integers(0, 256, n).astype(np.uint8).tobytes())
            good = checksum_16(bytes(payload))
            bit = int(rng.integers(0, n * 8))
            payload[bit // 8] ^= 1 << (bit % 8)
            assert checksum_16(bytes(payload)) != good


class TestGoldenVector:
    def test_encode_matches_golden(self):
        assert encode_telemetry(golden_frame()) == GOLDEN_BYTES

    def test_decode_inverse(self):
        assert decode_telemetry(GOLDEN_BYTES) == golden_frame()

    def test_header_fields(self):
        total = int.from_bytes(GOLDEN_BYTES[:2], "big")
        assert total == len(GOLDEN_BYTES) == 484
        stored = int.from_bytes(GOLDEN_BYTES[2:4], "big")
        assert stored == checksum_16(GOLDEN_BYTES[4:])

    def test_corrupted_byte_detected(self):
        corrupted = bytearray(GOLDEN_BYTES)
        corrupted[7] ^= 0x01
        with pytest.raises(ChecksumMismatch):
            decode_telemetry(bytes(corrupted))


class TestRoundTrip:
    def test_thousand_random_frames(self, rng):
        for _ in range(1000):
            frame = random_frame(rng)
            assert decode_telemetry(encode_telemetry(frame)) == frame

    def test_quantization_fixed_point(self, rng):
        # decode(encode(f)) == f.quantized() for frames off the wire grid
        frame = TelemetryFrame(
            seq=1, stamp_ms=2, battery_v=12.3456, x=1.00004, y=-2.00006,
            theta=1.234567, v=0.55555, w=-0.44444, compass_deg=123.44,
            lat=21.00000123, lon=105.8000049,
            sonar=(0.123456,) * 8, laser=(42.0601,) * WIRE_LASER_BEAMS,
        )
        assert decode_telemetry(encode_telemetry(frame)) == frame.quantized()

    def test_single_bit_corruption_detected_anywhere(self, rng):
        # any single flipped bit in header or payload must be rejected
        frame = golden_frame()
        packet = bytearray(encode_telemetry(frame))
        for _ in range(500):
            bit = int(rng.integers(0, len(packet) * 8))
            corrupted = bytearray(packet)
            corrupted[bit // 8] ^= 1 << (bit % 8)
            try:
                decoded = decode_telemetry(bytes(corrupted))
            except (FramingError, ChecksumMismatch, FieldParseError, FieldRangeError):
                continue
            pytest.fail(f"bit {bit}: corruption decoded as {decoded}")


class TestDecodeErrors:
    def test_truncated_packet(self):
        with pytest.raises(FramingError):
            decode_telemetry(GOLDEN_BYTES[:-3])

    def test_short_header(self):
        with pytest.raises(FramingError):
            decode_telemetry(b"\x00")

    def test_compass_out_of_range(self):
        frame = golden_frame()
        packet = encode_telemetry(frame)
        payload = packet[4:].decode().split(":")
        payload[8] = "361.0"
        rebuilt = ":".join(payload).encode()
        header = (len(rebuilt) + 4).to_bytes(2, "big") + checksum_16(rebuilt).to_bytes(2, "big")
        with pytest.raises(FieldRangeError):
            decode_telemetry(header + rebuilt)

    def test_garbage_field(self):
        frame = golden_frame()
        packet = encode_telemetry(frame)
        payload = packet[4:].decode().split(":")
        payload[2] = "twelve"
        rebuilt = ":".join(payload).encode()
        header = (len(rebuilt) + 4).to_bytes(2, "big") + checksum_16(rebuilt).to_bytes(2, "big")
        with pytest.raises(FieldParseError):
            decode_telemetry(header + rebuilt)

    def test_error_codes_distinct(self):
        codes = {
            FramingError.code,
            ChecksumMismatch.code,
            FieldParseError.code,
            FieldRangeError.code,
        }
        assert len(codes) == 4

    def test_encode_overflow(self):
        import sys

        frame = golden_frame()
        huge = TelemetryFrame(**{**frame.__dict__, "seq": 10 ** 70_000})
        old = sys.get_int_max_str_digits()
        sys.set_int_max_str_digits(100_000)
        try:
            with pytest.raises(EncodeError):
                encode_telemetry(huge)
        finally:
            sys.set_int_max_str_digits(old)


class TestClassify:
    def test_admin_kinds(self):
        for kind in (CommandKind.CONNECT, CommandKind.DISCONNECT, CommandKind.SET_TWIST,
                     CommandKind.STOP, CommandKind.SET_PTZ, CommandKind.SET_MODE):
            assert classify(CommandMessage(kind=kind)) is ChannelClass.ADMIN_COMMAND

    def test_telemetry_kinds(self):
        assert classify(CommandMessage(kind=CommandKind.HEARTBEAT)) is ChannelClass.TELEMETRY
        assert classify(CommandMessage(kind=CommandKind.JOYSTICK_AXES)) is ChannelClass.TELEMETRY
        assert classify(golden_frame()) is ChannelClass.TELEMETRY

    def test_media(self):
        frame = CameraFrame(stamp_ms=0, width=2, height=2, pixels=b"xx", frame_seq=1)
        assert classify(frame) is ChannelClass.MEDIA

    def test_totality(self):
        with pytest.raises(TypeError):
            classify(42)


class TestCommands:
    def test_round_trip(self):
        msg = CommandMessage(kind=CommandKind.SET_TWIST, v=0.5, w=-0.25)
        assert decode_command(encode_command(msg)) == msg

    def test_joystick_round_trip(self):
        msg = CommandMessage(kind=CommandKind.JOYSTICK_AXES, axes=(12, 1023), buttons=5)
        assert decode_command(encode_command(msg)) == msg

    def test_joystick_axes_bounds(self):
        bad = CommandMessage(kind=CommandKind.JOYSTICK_AXES, axes=(0, 1024))
        with pytest.raises(ValueError):
            bad.validate()

    def test_malformed_json(self):
        with pytest.raises(FieldParseError):
            decode_command(b"{nope")

    def test_unknown_field(self):
        with pytest.raises(FieldParseError):
            decode_command(b'{"kind":"STOP","bogus":1}')


class TestMediaHeader:
    def test_round_trip(self):
        packet = pack_media(42, 123456, b"payload")
        assert unpack_media(packet) == (42, 123456, b"payload")

    def test_wrapping(self):
        packet = pack_media(0x1FFFF, 0x1_FFFF_FFFF, b"")
        seq, stamp, _ = unpack_media(packet)
        assert seq == 0xFFFF and stamp == 0xFFFFFFFF

    def test_short_packet(self):
        with pytest.raises(FramingError):
            unpack_media(b"\x00\x01")


class TestLatestBuffer:
    def test_freshest_wins_out_of_order(self):
        buf = LatestBuffer()
        assert buf.offer(3, "c")
        assert not buf.offer(1, "a")  # stale dropped
        assert buf.offer(5, "e")
        assert not buf.offer(4, "d")
        assert buf.latest() == "e"
        assert buf.stale_drops == 2

    def test_take_fresh_consumes(self):
        buf = LatestBuffer()
        buf.offer(1, "a")
        assert buf.take_fresh() == "a"
        assert buf.take_fresh() is None
        buf.offer(2, "b")
        assert buf.take_fresh() == "b"


class TestSubsample:
    def test_full_resolution_passthrough(self):
        ranges = tuple(float(i) for i in range(101))
        assert subsample_laser(ranges, 1.0) == ranges

    def test_half_degree_stride(self):
        ranges = tuple(float(i) for i in range(201))
        out = subsample_laser(ranges, 0.5)
        assert len(out) == 101 and out[0] == 0.0 and out[1] == 2.0

    def test_bad_length(self):
        with pytest.raises(EncodeError):
            subsample_laser((1.0,) * 100, 1.0)
