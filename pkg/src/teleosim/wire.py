"""Message definitions, channel classes and the telemetry packet codec.

Telemetry packet layout (application level):

    +----------------------+----------------------+
    | total length 16 bits | checksum 16 bits     |   header, big-endian
    +----------------------+----------------------+
    | sensor fields joined by ":" (ASCII text)    |   payload
    +---------------------------------------------+

total length counts header plus payload. The checksum is the RFC 1071
16-bit one's-complement sum over the payload only (big-endian words, odd
trailing byte zero-padded), finally complemented.

Canonical payload field order (120 fields):

    seq:stamp:battery:x:y:theta:v:w:compass:lat:lon:s0..s7:l0..l100

Numeric formats are fixed-decimal with '.' separator: battery %.2f,
x/y %.4f, theta %.5f, v/w %.4f, compass %.1f, lat/lon %.5f, sonar %.3f.
Laser ranges travel as integer decimeters (0.1 m resolution, enough for
the 0.1 m mapping grid) subsampled to 1 degree (101 beams). NO_ECHO is
encoded as -1 for both sonar and laser.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Any

from .sensors import LASER_MAX, NO_ECHO, SONAR_MAX, SONAR_MIN

WIRE_LASER_BEAMS = 101  # 100 deg FOV at 1 deg wire resolution
TELEMETRY_FIELD_COUNT = 11 + 8 + WIRE_LASER_BEAMS
HEADER_LEN = 4
MAX_PAYLOAD = 0xFFFF - HEADER_LEN

V_WIRE_LIMIT = 1.5
W_WIRE_LIMIT = 4.0
BATTERY_WIRE_LIMIT = 60.0


class ChannelClass(Enum):
    ADMIN_COMMAND = "admin"  # reliable ordered stream (TCP in live mode)
    TELEMETRY = "telemetry"  # best-effort datagram, freshest wins (UDP)
    MEDIA = "media"  # timestamped frame stream (UDP + RTP-style header)


class CommandKind(Enum):
    CONNECT = "CONNECT"
    DISCONNECT = "DISCONNECT"
    SET_TWIST = "SET_TWIST"
    STOP = "STOP"
    SET_PTZ = "SET_PTZ"
    SET_MODE = "SET_MODE"
    HEARTBEAT = "HEARTBEAT"
    JOYSTICK_AXES = "JOYSTICK_AXES"


ADMIN_KINDS = {
    CommandKind.CONNECT,
    CommandKind.DISCONNECT,
    CommandKind.SET_TWIST,
    CommandKind.STOP,
    CommandKind.SET_PTZ,
    CommandKind.SET_MODE,
}
DATAGRAM_KINDS = {CommandKind.HEARTBEAT, CommandKind.JOYSTICK_AXES}


class DecodeError(ValueError):
    """Base for telemetry decode failures; ``code`` names the failure class."""

    code = "DECODE"


class FramingError(DecodeError):
    code = "FRAMING"


class ChecksumMismatch(DecodeError):
    code = "CHECKSUM_MISMATCH"


class FieldParseError(DecodeError):
    code = "FIELD_PARSE"


class FieldRangeError(DecodeError):
    code = "FIELD_RANGE"


class EncodeError(ValueError):
    pass


def checksum_16(data: bytes) -> int:
    """RFC 1071 style Internet checksum: one's-complement sum, complemented."""
    total = 0
    n = len(data)
    for i in range(0, n - 1, 2):
        total += (data[i] << 8) | data[i + 1]
    if n % 2:
        total += data[-1] << 8
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _q(value: float, fmt: str) -> float:
    """Quantize a float to its wire representation."""
    return float(format(value, fmt))


@dataclass(frozen=True)
class TelemetryFrame:
    """One periodic sensor snapshot as carried on the telemetry channel."""

    seq: int
    stamp_ms: int
    battery_v: float
    x: float
    y: float
    theta: float
    v: float
    w: float
    compass_deg: float
    lat: float
    lon: float
    sonar: tuple[float, ...]  # 8 ranges, NO_ECHO = inf
    laser: tuple[float, ...]  # 101 ranges at 1 deg, NO_ECHO = inf

    def quantized(self) -> "TelemetryFrame":
        """Snap all fields to wire precision; fixed point of encode/decode."""
        return replace(
            self,
            battery_v=_q(self.battery_v, ".2f"),
            x=_q(self.x, ".4f"),
            y=_q(self.y, ".4f"),
            theta=_q(self.theta, ".5f"),
            v=_q(self.v, ".4f"),
            w=_q(self.w, ".4f"),
            compass_deg=_q(self.compass_deg, ".1f"),
            lat=_q(self.lat, ".5f"),
            lon=_q(self.lon, ".5f"),
            sonar=tuple(r if math.isinf(r) else _q(r, ".3f") for r in self.sonar),
            laser=tuple(r if math.isinf(r) else round(r * 10.0) / 10.0 for r in self.laser),
        )


def subsample_laser(ranges: tuple[float, ...], resolution_deg: float) -> tuple[float, ...]:
    """Reduce a native scan to the 101-beam 1-degree wire resolution."""
    stride = round(1.0 / resolution_deg)
    out = ranges[::stride]
    if len(out) != WIRE_LASER_BEAMS:
        raise EncodeError(f"cannot subsample scan of {len(ranges)} beams")
    return out


def _fmt_range(r: float, fmt: str) -> str:
    return "-1" if math.isinf(r) else format(r, fmt)


def _fmt_laser(r: float) -> str:
    return "-1" if math.isinf(r) else str(int(round(r * 10.0)))


def encode_telemetry(frame: TelemetryFrame) -> bytes:
    """Serialize a frame: 4-byte header (length, checksum) + text payload."""
    f = frame
    parts = [
        str(f.seq),
        str(f.stamp_ms),
        format(f.battery_v, ".2f"),
        format(f.x, ".4f"),
        format(f.y, ".4f"),
        format(f.theta, ".5f"),
        format(f.v, ".4f"),
        format(f.w, ".4f"),
        format(f.compass_deg, ".1f"),
        format(f.lat, ".5f"),
        format(f.lon, ".5f"),
    ]
    if len(f.sonar) != 8:
        raise EncodeError("frame needs 8 sonar ranges")
    if len(f.laser) != WIRE_LASER_BEAMS:
        raise EncodeError(f"frame needs {WIRE_LASER_BEAMS} laser ranges")
    parts.extend(_fmt_range(r, ".3f") for r in f.sonar)
    parts.extend(_fmt_laser(r) for r in f.laser)
    payload = ":".join(parts).encode("ascii")
    if len(payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(payload)} bytes overflows the length field")
    header = struct.pack(">HH", HEADER_LEN + len(payload), checksum_16(payload))
    return header + payload


def _parse_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise FieldParseError(f"field {name}: {text!r} is not an integer") from exc


def _parse_float(text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise FieldParseError(f"field {name}: {text!r} is not a number") from exc
    if not math.isfinite(value):
        raise FieldParseError(f"field {name}: non-finite value")
    return value


def _check_range(value: float, lo: float, hi: float, name: str) -> float:
    if not (lo <= value <= hi):
        raise FieldRangeError(f"field {name}: {value} outside [{lo}, {hi}]")
    return value


def _parse_range(text: str, name: str, lo: float, hi: float) -> float:
    if text == "-1":
        return NO_ECHO
    return _check_range(_parse_float(text, name), lo, hi, name)


def decode_telemetry(data: bytes) -> TelemetryFrame:
    """Parse and validate a telemetry packet.

    Raises FramingError, ChecksumMismatch, FieldParseError or
    FieldRangeError; each carries a distinct ``code``.
    """
    if len(data) < HEADER_LEN:
        raise FramingError(f"packet of {len(data)} bytes is shorter than the header")
    total, stored = struct.unpack(">HH", data[:HEADER_LEN])
    if total != len(data):
        raise FramingError(f"declared length {total} != actual {len(data)}")
    payload = data[HEADER_LEN:]
    actual = checksum_16(payload)
    if actual != stored:
        raise ChecksumMismatch(f"checksum 0x{actual:04x} != stored 0x{stored:04x}")
    try:
        text = payload.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FieldParseError("payload is not ASCII") from exc
    parts = text.split(":")
    if len(parts) != TELEMETRY_FIELD_COUNT:
        raise FieldParseError(f"expected {TELEMETRY_FIELD_COUNT} fields, got {len(parts)}")
    seq = _parse_int(parts[0], "seq")
    stamp = _parse_int(parts[1], "stamp")
    if seq < 0 or stamp < 0:
        raise FieldRangeError("seq/stamp must be non-negative")
    battery = _check_range(_parse_float(parts[2], "battery"), 0.0, BATTERY_WIRE_LIMIT, "battery")
    x = _parse_float(parts[3], "x")
    y = _parse_float(parts[4], "y")
    theta = _check_range(_parse_float(parts[5], "theta"), -3.1416, 3.1416, "theta")
    v = _check_range(_parse_float(parts[6], "v"), -V_WIRE_LIMIT, V_WIRE_LIMIT, "v")
    w = _check_range(_parse_float(parts[7], "w"), -W_WIRE_LIMIT, W_WIRE_LIMIT, "w")
    compass = _parse_float(parts[8], "compass")
    if not (0.0 <= compass < 360.0):
        raise FieldRangeError(f"field compass: {compass} outside [0, 360)")
    lat = _check_range(_parse_float(parts[9], "lat"), -90.0, 90.0, "lat")
    lon = _check_range(_parse_float(parts[10], "lon"), -180.0, 180.0, "lon")
    sonar = tuple(
        _parse_range(parts[11 + i], f"sonar{i}", SONAR_MIN, SONAR_MAX) for i in range(8)
    )
    laser = []
    for i in range(WIRE_LASER_BEAMS):
        text_i = parts[19 + i]
        if text_i == "-1":
            laser.append(NO_ECHO)
            continue
        dm = _parse_int(text_i, f"laser{i}")
        if not (0 <= dm <= round(LASER_MAX * 10)):
            raise FieldRangeError(f"field laser{i}: {dm} dm outside [0, 800]")
        laser.append(dm / 10.0)
    return TelemetryFrame(
        seq=seq,
        stamp_ms=stamp,
        battery_v=battery,
        x=x,
        y=y,
        theta=theta,
        v=v,
        w=w,
        compass_deg=compass,
        lat=lat,
        lon=lon,
        sonar=sonar,
        laser=tuple(laser),
    )


@dataclass(frozen=True)
class CommandMessage:
    """Operator-side message; arguments depend on the kind."""

    kind: CommandKind
    v: float | None = None
    w: float | None = None
    pan: float | None = None
    tilt: float | None = None
    zoom: float | None = None
    mode: str | None = None
    token: str | None = None
    stamp_ms: int | None = None
    axes: tuple[int, int] | None = None
    buttons: int | None = None
    delay_ms: float | None = None
    jitter_ms: float | None = None

    def validate(self) -> None:
        if self.kind == CommandKind.JOYSTICK_AXES:
            if self.axes is None or len(self.axes) != 2:
                raise ValueError("joystick message needs two axes")
            if not all(0 <= a <= 1023 for a in self.axes):
                raise ValueError(f"joystick axes {self.axes} outside [0, 1023]")
        if self.kind == CommandKind.SET_TWIST and (self.v is None or self.w is None):
            raise ValueError("SET_TWIST needs v and w")
        if self.kind == CommandKind.SET_PTZ and None in (self.pan, self.tilt, self.zoom):
            raise ValueError("SET_PTZ needs pan, tilt, zoom")


def encode_command(msg: CommandMessage) -> bytes:
    body: dict[str, Any] = {"kind": msg.kind.value}
    for f in fields(msg):
        if f.name == "kind":
            continue
        value = getattr(msg, f.name)
        if value is not None:
            body[f.name] = list(value) if isinstance(value, tuple) else value
    return json.dumps(body, separators=(",", ":")).encode("ascii")


def decode_command(data: bytes) -> CommandMessage:
    try:
        body = json.loads(data.decode("ascii"))
        kind = CommandKind(body.pop("kind"))
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise FieldParseError(f"malformed command: {exc}") from exc
    if "axes" in body:
        body["axes"] = tuple(body["axes"])
    allowed = {f.name for f in fields(CommandMessage)}
    unknown = set(body) - allowed
    if unknown:
        raise FieldParseError(f"unknown command fields {sorted(unknown)}")
    msg = CommandMessage(kind=kind, **body)
    msg.validate()
    return msg


def classify(message: Any) -> ChannelClass:
    """Total mapping from any protocol message to its channel class."""
    from .sensors import CameraFrame  # local import keeps the dep one-way

    if isinstance(message, CommandMessage):
        if message.kind in ADMIN_KINDS:
            return ChannelClass.ADMIN_COMMAND
        return ChannelClass.TELEMETRY
    if isinstance(message, TelemetryFrame):
        return ChannelClass.TELEMETRY
    if isinstance(message, CameraFrame):
        return ChannelClass.MEDIA
    raise TypeError(f"{type(message).__name__} is not a protocol message")


MEDIA_HEADER = struct.Struct(">HI")  # 16-bit sequence, 32-bit timestamp (ms)


def pack_media(seq: int, stamp_ms: int, payload: bytes) -> bytes:
    return MEDIA_HEADER.pack(seq & 0xFFFF, stamp_ms & 0xFFFFFFFF) + payload


def unpack_media(data: bytes) -> tuple[int, int, bytes]:
    if len(data) < MEDIA_HEADER.size:
        raise FramingError("media packet shorter than its header")
    seq, stamp = MEDIA_HEADER.unpack_from(data)
    return seq, stamp, data[MEDIA_HEADER.size :]


class LatestBuffer:
    """Freshest-wins receive buffer for a datagram stream.

    Offers keep only the highest sequence number seen; stale arrivals are
    dropped and counted.
    """

    def __init__(self) -> None:
        self._seq = -1
        self._item: Any = None
        self._fresh = False
        self.stale_drops = 0

    def offer(self, seq: int, item: Any) -> bool:
        if seq <= self._seq:
            self.stale_drops += 1
            return False
        self._seq = seq
        self._item = item
        self._fresh = True
        return True

    @property
    def latest_seq(self) -> int:
        return self._seq

    def latest(self) -> Any:
        return self._item

    def take_fresh(self) -> Any:
        """Return the newest item if unconsumed, else None."""
        if not self._fresh:
            return None
        self._fresh = False
        return self._item
