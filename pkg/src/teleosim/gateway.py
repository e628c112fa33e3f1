"""WebSocket gateway bridging the operator client core to the browser
console.

Wire contract (JSON text messages unless noted):

UI -> gateway:
    {"type": "drive", "v": <m/s>, "w": <rad/s>}
    {"type": "stop"}
    {"type": "ptz", "pan": <deg>, "tilt": <deg>, "zoom": <factor>}
    {"type": "mode", "mode": "MANUAL"|"ASSISTED"|"AUTONOMY_SAFEPOINT"}
    {"type": "joystick", "axes": [h, v], "buttons": <mask>}
    {"type": "connect"}
    {"type": "disconnect"}
    {"type": "ping"}

gateway -> UI:
    {"type": "hello", "grid": {"rows", "cols", "resolution", "origin",
        "cells": <base64 zlib of row-major uint8>}}
    {"type": "represent", "t", "pose": [x, y, theta]|null,
        "trajectory_tail": [[stamp, x, y, theta], ...],
        "grid_changes": [[row, col, value], ...]}
    {"type": "telemetry", "seq", "stamp_ms", "battery_v", "x", "y",
        "theta", "v", "w", "compass_deg", "lat", "lon",
        "sonar": [...], "laser": [...]}   (NO_ECHO encoded as -1)
    {"type": "status", "t", "delay_ms", "jitter_ms", "link", "mode",
        "connected"}
    {"type": "error", "error": <text>}
    {"type": "pong"}
    binary frames: 6-byte media header (seq u16 BE, stamp u32 BE) + image

A malformed UI message produces an error reply; the session stays open.
"""

from __future__ import annotations

import base64
import json
import logging
import math
import threading
import zlib
from typing import Any, Callable

from .client import TeleopClient
from .wire import MEDIA_HEADER, TelemetryFrame

log = logging.getLogger(__name__)


class GatewayError(ValueError):
    pass


Action = tuple[str, tuple]


def translate_ui_message(text: str) -> Action:
    """Parse one UI JSON message into (action, args); raises GatewayError."""
    try:
        body = json.loads(text)
    except ValueError as exc:
        raise GatewayError(f"not JSON: {exc}") from exc
    if not isinstance(body, dict) or "type" not in body:
        raise GatewayError("message needs a type field")
    kind = body["type"]
    try:
        if kind == "drive":
            return "drive", (float(body["v"]), float(body["w"]))
        if kind == "stop":
            return "stop", ()
        if kind == "ptz":
            return "ptz", (float(body["pan"]), float(body["tilt"]), float(body["zoom"]))
        if kind == "mode":
            mode = str(body["mode"])
            if mode not in ("MANUAL", "ASSISTED", "AUTONOMY_SAFEPOINT"):
                raise GatewayError(f"unknown mode {mode!r}")
            return "mode", (mode,)
        if kind == "joystick":
            axes = body["axes"]
            if not isinstance(axes, list) or len(axes) != 2:
                raise GatewayError("joystick needs two axes")
            return "joystick", ((int(axes[0]), int(axes[1])), int(body.get("buttons", 0)))
        if kind == "connect":
            return "connect", ()
        if kind == "disconnect":
            return "disconnect", ()
        if kind == "ping":
            return "ping", ()
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, GatewayError):
            raise
        raise GatewayError(f"bad {kind} message: {exc}") from exc
    raise GatewayError(f"unknown message type {kind!r}")


def apply_action(client: TeleopClient, action: Action) -> None:
    name, args = action
    if name == "drive":
        client.send_drive(*args)
    elif name == "stop":
        client.send_stop()
    elif name == "ptz":
        client.send_ptz(*args)
    elif name == "mode":
        client.send_mode(*args)
    elif name == "joystick":
        client.send_joystick(*args)
    elif name == "connect":
        client.connect()
    elif name == "disconnect":
        client.disconnect()


def _wire_value(value: float) -> float:
    return -1.0 if math.isinf(value) else value


def telemetry_to_json(frame: TelemetryFrame) -> dict[str, Any]:
    return {
        "type": "telemetry",
        "seq": frame.seq,
        "stamp_ms": frame.stamp_ms,
        "battery_v": frame.battery_v,
        "x": frame.x,
        "y": frame.y,
        "theta": frame.theta,
        "v": frame.v,
        "w": frame.w,
        "compass_deg": frame.compass_deg,
        "lat": frame.lat,
        "lon": frame.lon,
        "sonar": [_wire_value(r) for r in frame.sonar],
        "laser": [_wire_value(r) for r in frame.laser],
    }


def snapshot_to_json(snap: dict[str, Any]) -> dict[str, Any]:
    return {
        "type": "represent",
        "t": snap["t"],
        "pose": list(snap["pose"]) if snap["pose"] else None,
        "trajectory_tail": [list(p) for p in snap["trajectory_tail"]],
        "grid_changes": [list(ch) for ch in snap["grid_changes"]],
    }


def hello_message(client: TeleopClient) -> dict[str, Any]:
    grid = client.represent.grid
    packed = base64.b64encode(zlib.compress(grid.cells.tobytes())).decode("ascii")
    return {
        "type": "hello",
        "grid": {
            "rows": grid.rows,
            "cols": grid.cols,
            "resolution": grid.resolution,
            "origin": list(grid.bounds[:2]),
            "cells": packed,
        },
    }


class GatewayServer:
    """Serves the console UI over websockets (thread-based sync server).

    `post` injects UI-triggered work onto the thread that owns the client
    (the wall-clock runner in live mode); pass None to call inline.
    """

    def __init__(
        self,
        client: TeleopClient,
        host: str = "127.0.0.1",
        port: int = 8765,
        post: Callable[[Callable[[], None]], None] | None = None,
    ):
        self.client = client
        self.host = host
        self.port = port
        self.post = post if post is not None else (lambda fn: fn())
        self._connections: list[Any] = []
        self._lock = threading.Lock()
        self._server = None
        client.add_snapshot_listener(self._on_snapshot)
        client.add_status_listener(self._on_status)
        client.add_frame_listener(self._on_frame)

    # --------------------------------------------------------- broadcasting

    def _broadcast_text(self, body: dict[str, Any]) -> None:
        data = json.dumps(body, separators=(",", ":"))
        self._broadcast(data)

    def _broadcast(self, data: Any) -> None:
        with self._lock:
            conns = list(self._connections)
        for conn in conns:
            try:
                conn.send(data)
            except Exception:
                self._drop(conn)

    def _drop(self, conn: Any) -> None:
        with self._lock:
            if conn in self._connections:
                self._connections.remove(conn)

    def _on_snapshot(self, snap: dict[str, Any]) -> None:
        body = snapshot_to_json(snap)
        self._broadcast_text(body)
        if snap.get("telemetry") is not None:
            self._broadcast_text(telemetry_to_json(snap["telemetry"]))

    def _on_status(self, status: dict[str, Any]) -> None:
        self._broadcast_text({"type": "status", **status})

    def _on_frame(self, seq: int, stamp: int, payload: bytes) -> None:
        self._broadcast(MEDIA_HEADER.pack(seq & 0xFFFF, stamp & 0xFFFFFFFF) + payload)

    # -------------------------------------------------------------- serving

    def handle_connection(self, conn: Any) -> None:
        """One UI session: hello, then request/stream until it closes."""
        conn.send(json.dumps(hello_message(self.client), separators=(",", ":")))
        with self._lock:
            self._connections.append(conn)
        try:
            for message in conn:
                if isinstance(message, bytes):
                    continue
                try:
                    action = translate_ui_message(message)
                except GatewayError as exc:
                    conn.send(json.dumps({"type": "error", "error": str(exc)}))
                    continue
                if action[0] == "ping":
                    conn.send(json.dumps({"type": "pong"}))
                    continue
                self.post(lambda a=action: apply_action(self.client, a))
        finally:
            self._drop(conn)

    def serve_forever(self) -> None:
        from websockets.sync.server import serve

        with serve(self.handle_connection, self.host, self.port) as server:
            self._server = server
            server.serve_forever()

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def shutdown(self) -> None:
        if self._server is not None:
            self._server.shutdown()
