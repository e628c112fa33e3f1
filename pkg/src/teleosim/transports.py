"""Live-socket mode: the same server/client logic over real transports.

ADMIN_COMMAND rides a TCP stream with 4-byte big-endian length prefixes;
TELEMETRY and MEDIA ride UDP datagrams (media packets carry the RTP-style
6-byte header added by the server). A wall-clock runner drives the same
Scheduler the virtual mode uses; socket reader threads post inbound
payloads onto it, so all protocol logic stays single-threaded.
"""

from __future__ import annotations

import logging
import queue
import socket
import struct
import threading
import time

from .clock import Scheduler
from .wire import ChannelClass

log = logging.getLogger(__name__)

HELLO = b"HELLO"
LENGTH_PREFIX = struct.Struct(">I")
MAX_ADMIN_MSG = 1 << 20


class WallClockRunner:
    """Runs a Scheduler against real time and injects external events."""

    def __init__(self, scheduler: Scheduler):
        self.scheduler = scheduler
        self._inbox: queue.Queue = queue.Queue()
        self._stop = threading.Event()

    def post(self, fn) -> None:
        self._inbox.put(fn)

    def stop(self) -> None:
        self._stop.set()

    def run(self) -> None:
        t0 = time.monotonic()
        while not self._stop.is_set():
            try:
                while True:
                    self._inbox.get_nowait()()
            except queue.Empty:
                pass
            now_ms = (time.monotonic() - t0) * 1000.0
            self.scheduler.run_until(now_ms)
            nxt = self.scheduler.next_event_time()
            sleep_s = 0.005 if nxt is None else min(max((nxt - now_ms) / 1000.0, 0.0005), 0.02)
            time.sleep(sleep_s)


def send_framed(conn: socket.socket, payload: bytes) -> None:
    conn.sendall(LENGTH_PREFIX.pack(len(payload)) + payload)


def recv_framed(conn: socket.socket) -> bytes | None:
    header = _recv_exact(conn, LENGTH_PREFIX.size)
    if header is None:
        return None
    (length,) = LENGTH_PREFIX.unpack(header)
    if length > MAX_ADMIN_MSG:
        return None
    return _recv_exact(conn, length)


def _recv_exact(conn: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class ServerTransport:
    """Server-side sockets: one TCP control stream plus two UDP sockets.

    Datagram peer addresses are learned from the client's HELLO packets.
    Outbound sends before a peer is known are dropped.
    """

    def __init__(self, host: str, admin_port: int, telemetry_port: int, media_port: int):
        self.listener = socket.create_server((host, admin_port))
        self.telemetry_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.telemetry_sock.bind((host, telemetry_port))
        self.media_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.media_sock.bind((host, media_port))
        self.admin_conn: socket.socket | None = None
        self.telemetry_peer = None
        self.media_peer = None
        self._lock = threading.Lock()

    def send(self, channel: ChannelClass, payload: bytes) -> None:
        try:
            if channel is ChannelClass.ADMIN_COMMAND:
                with self._lock:
                    if self.admin_conn is not None:
                        send_framed(self.admin_conn, payload)
            elif channel is ChannelClass.TELEMETRY:
                if self.telemetry_peer is not None:
                    self.telemetry_sock.sendto(payload, self.telemetry_peer)
            elif channel is ChannelClass.MEDIA:
                if self.media_peer is not None:
                    self.media_sock.sendto(payload, self.media_peer)
        except OSError as exc:
            log.warning("send on %s failed: %s", channel.value, exc)

    def serve(self, runner: WallClockRunner, server) -> list[threading.Thread]:
        """Spawn reader threads; inbound bytes are posted to the runner."""

        def accept_loop() -> None:
            while True:
                try:
                    conn, addr = self.listener.accept()
                except OSError:
                    return
                log.info("admin connection from %s", addr)
                with self._lock:
                    self.admin_conn = conn
                threading.Thread(target=admin_reader, args=(conn,), daemon=True).start()

        def admin_reader(conn: socket.socket) -> None:
            while True:
                try:
                    payload = recv_framed(conn)
                except OSError:
                    payload = None
                if payload is None:
                    with self._lock:
                        if self.admin_conn is conn:
                            self.admin_conn = None
                    return
                runner.post(lambda p=payload: server.on_admin_bytes(p))

        def datagram_reader(sock: socket.socket, which: str) -> None:
            while True:
                try:
                    payload, addr = sock.recvfrom(65535)
                except OSError:
                    return
                if which == "telemetry":
                    self.telemetry_peer = addr
                else:
                    self.media_peer = addr
                if payload == HELLO:
                    continue
                if which == "telemetry":
                    runner.post(lambda p=payload: server.on_datagram_bytes(p))

        threads = [
            threading.Thread(target=accept_loop, daemon=True),
            threading.Thread(
                target=datagram_reader, args=(self.telemetry_sock, "telemetry"), daemon=True
            ),
            threading.Thread(
                target=datagram_reader, args=(self.media_sock, "media"), daemon=True
            ),
        ]
        for t in threads:
            t.start()
        return threads

    def close(self) -> None:
        for sock in (self.listener, self.telemetry_sock, self.media_sock, self.admin_conn):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass


class ClientTransport:
    """Client-side sockets mirroring ServerTransport."""

    def __init__(self, host: str, admin_port: int, telemetry_port: int, media_port: int):
        self.server_addr = (host, admin_port)
        self.admin_conn = socket.create_connection((host, admin_port), timeout=5.0)
        self.admin_conn.settimeout(None)
        self.telemetry_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.telemetry_sock.bind(("", 0))
        self.telemetry_sock.connect((host, telemetry_port))
        self.media_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.media_sock.bind(("", 0))
        self.media_sock.connect((host, media_port))
        # teach the server our datagram return addresses
        self.telemetry_sock.send(HELLO)
        self.media_sock.send(HELLO)
        self._lock = threading.Lock()

    def send(self, channel: ChannelClass, payload: bytes) -> None:
        try:
            if channel is ChannelClass.ADMIN_COMMAND:
                with self._lock:
                    send_framed(self.admin_conn, payload)
            elif channel is ChannelClass.TELEMETRY:
                self.telemetry_sock.send(payload)
            elif channel is ChannelClass.MEDIA:
                self.media_sock.send(payload)
        except OSError as exc:
            log.warning("send on %s failed: %s", channel.value, exc)

    def serve(self, runner: WallClockRunner, client) -> list[threading.Thread]:
        def admin_reader() -> None:
            while True:
                try:
                    payload = recv_framed(self.admin_conn)
                except OSError:
                    payload = None
                if payload is None:
                    return
                runner.post(lambda p=payload: client.on_admin_bytes(p))

        def reader(sock: socket.socket, handler_name: str) -> None:
            while True:
                try:
                    payload = sock.recv(65535)
                except OSError:
                    return
                handler = getattr(client, handler_name)
                runner.post(lambda p=payload, h=handler: h(p))

        threads = [
            threading.Thread(target=admin_reader, daemon=True),
            threading.Thread(
                target=reader, args=(self.telemetry_sock, "on_telemetry_bytes"), daemon=True
            ),
            threading.Thread(target=reader, args=(self.media_sock, "on_media_bytes"), daemon=True),
        ]
        for t in threads:
            t.start()
        return threads

    def close(self) -> None:
        for sock in (self.admin_conn, self.telemetry_sock, self.media_sock):
            try:
                sock.close()
            except OSError:
                pass
