"""Live transports for the session server.

Two bindings carry identical payloads: newline-delimited JSON over a raw
TCP socket (harness clients) and text frames over a standard websocket
handshake (the browser UI). Both run on one asyncio loop, so all mutations
to a session are naturally serialized. Per-client outbound queues are
capped; on overflow stale signal frames are evicted oldest-first per
channel and sequenced messages are never dropped (that closes the
connection instead).
"""

from __future__ import annotations

import asyncio
import mimetypes
import time
from collections import deque
from http import HTTPStatus
from pathlib import Path

from . import protocol
from .config import ServerConfig
from .errors import PulseboardError, SchemaError
from .lesson import Role
from .protocol import Envelope, canonical_dumps
from .server import SessionHub


class OutboundQueue:
    """Bounded fan-out queue with the frame-eviction backpressure policy."""

    def __init__(self, limit: int) -> None:
        self.limit = limit
        self.items: deque[Envelope] = deque()
        self.ready = asyncio.Event()
        self.overflowed = False

    def put(self, env: Envelope) -> bool:
        """Enqueue; returns False when the connection must be closed."""
        if len(self.items) >= self.limit:
            if not self._evict_frame(prefer_channel=env.payload.get("channel") if env.type == protocol.SIGNAL_FRAME else None):
                if env.type == protocol.SIGNAL_FRAME:
                    return True  # drop the incoming frame, loss is tolerable
                self.overflowed = True
                self.ready.set()
                return False
        self.items.append(env)
        self.ready.set()
        return True

    def _evict_frame(self, prefer_channel: str | None) -> bool:
        if prefer_channel is not None:
            for i, queued in enumerate(self.items):
                if queued.type == protocol.SIGNAL_FRAME and queued.payload.get("channel") == prefer_channel:
                    del self.items[i]
                    return True
        for i, queued in enumerate(self.items):
            if queued.type == protocol.SIGNAL_FRAME:
                del self.items[i]
                return True
        return False

    def pop(self) -> Envelope | None:
        if self.items:
            return self.items.popleft()
        self.ready.clear()
        return None


class _Connection:
    def __init__(self, send_text, close, queue_limit: int) -> None:
        self.send_text = send_text
        self.close = close
        self.queue = OutboundQueue(queue_limit)
        self.sid: str | None = None
        self.pid: str | None = None
        self.writer_task: asyncio.Task | None = None

    async def writer_loop(self) -> None:
        try:
            while True:
                await self.queue.ready.wait()
                if self.queue.overflowed:
                    await self.close()
                    return
                env = self.queue.pop()
                if env is None:
                    continue
                await self.send_text(env.encode())
        except (asyncio.CancelledError, ConnectionError, OSError):
            pass


class _FileTraceWriter:
    """Append-only trace recording for live sessions."""

    def __init__(self, path: str, config: ServerConfig) -> None:
        self._fh = open(path, "w", encoding="utf-8")
        meta = {
            "format": "pulseboard-trace",
            "v": 1,
            "scenario": "live",
            "sid": "live",
            "seed": 0,
            "recorded_frames": True,
            "config": config.to_wire(),
        }
        self._fh.write(canonical_dumps({"meta": meta}) + "\n")
        self._fh.flush()

    def sink(self, kind: str, obj: dict) -> None:
        line = canonical_dumps(obj) if kind == "frame" else canonical_dumps({kind: obj})
        self._fh.write(line + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


class TransportServer:
    """Shared connection registry over both bindings."""

    def __init__(self, hub: SessionHub) -> None:
        self.hub = hub
        self.registry: dict[tuple[str, str], _Connection] = {}

    def route(self, deliveries) -> None:
        for pid, env in deliveries:
            conn = self.registry.get((env.sid, pid))
            if conn is None:
                continue
            if not conn.queue.put(env):
                # Sequenced message could not be queued: close, never drop.
                if conn.writer_task is not None:
                    conn.queue.ready.set()

    async def _send_error(self, conn: _Connection, sid: str, code: str, detail: str) -> None:
        env = Envelope(
            type=protocol.ERROR,
            sid=sid,
            sender=protocol.SERVER_ID,
            payload={"code": code, "detail": detail},
        )
        try:
            await conn.send_text(env.encode())
        except (ConnectionError, OSError):
            pass

    async def handle_line(self, conn: _Connection, line: str) -> None:
        try:
            env = Envelope.decode(line)
        except SchemaError as exc:
            await self._send_error(conn, conn.sid or "", exc.code, str(exc))
            return

        if conn.pid is None:
            if env.type != protocol.JOIN:
                await self._send_error(conn, env.sid, SchemaError.code, "first message must be JOIN")
                return
            try:
                protocol.validate_payload(env.type, env.payload)
                pid, deliveries = self.hub.join(
                    env.sid,
                    env.payload["name"],
                    Role(env.payload["role"]),
                    requested_pid=env.payload.get("participant"),
                )
            except PulseboardError as exc:
                await self._send_error(conn, env.sid, exc.code, str(exc))
                await conn.close()
                return
            conn.sid = env.sid
            conn.pid = pid
            self.registry[(env.sid, pid)] = conn
            self.route(deliveries)
            return

        if env.sender != conn.pid:
            await self._send_error(conn, conn.sid or env.sid, SchemaError.code, "from must match the joined participant")
            return
        deliveries = self.hub.handle(conn.sid or env.sid, conn.pid, env)
        self.route(deliveries)

    def disconnect(self, conn: _Connection) -> None:
        if conn.sid is not None and conn.pid is not None:
            self.registry.pop((conn.sid, conn.pid), None)
            deliveries = self.hub.leave(conn.sid, conn.pid)
            self.route(deliveries)
        if conn.writer_task is not None:
            conn.writer_task.cancel()


async def _tcp_client(server: TransportServer, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
    async def send_text(text: str) -> None:
        writer.write(text.encode("utf-8") + b"\n")
        await writer.drain()

    async def close() -> None:
        writer.close()

    conn = _Connection(send_text, close, server.hub.config.queue_limit)
    conn.writer_task = asyncio.ensure_future(conn.writer_loop())
    try:
        while True:
            raw = await reader.readline()
            if not raw:
                break
            line = raw.decode("utf-8").strip()
            if line:
                await server.handle_line(conn, line)
    except (ConnectionError, OSError):
        pass
    finally:
        server.disconnect(conn)
        writer.close()


def _static_file_responder(ui_dir: str):
    root = Path(ui_dir).resolve()

    def process_request(connection, request):
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        if request.headers.get("Upgrade", "").lower() == "websocket":
            return None
        path = request.path.split("?", 1)[0]
        if path in ("", "/"):
            path = "/index.html"
        target = (root / path.lstrip("/")).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")
        body = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        headers = Headers([("Content-Type", ctype), ("Content-Length", str(len(body)))])
        return Response(HTTPStatus.OK.value, "OK", headers, body)

    return process_request


async def start_servers(
    config: ServerConfig,
    ui_dir: str | None = None,
    record_path: str | None = None,
    hub: SessionHub | None = None,
):
    """Start the TCP and websocket bindings; returns (transport, tcp_server, ws_server)."""
    from websockets.asyncio.server import serve as ws_serve

    recorder = _FileTraceWriter(record_path, config) if record_path else None
    if hub is None:
        start = time.monotonic()
        hub = SessionHub(
            config=config,
            clock_ms=lambda: int((time.monotonic() - start) * 1000),
            record_sink=recorder.sink if recorder else None,
        )
    elif recorder is not None:
        hub.record_sink = recorder.sink
    transport = TransportServer(hub)

    tcp_server = await asyncio.start_server(
        lambda r, w: _tcp_client(transport, r, w), host="127.0.0.1", port=config.port
    )

    async def ws_handler(websocket) -> None:
        async def send_text(text: str) -> None:
            await websocket.send(text)

        async def close() -> None:
            await websocket.close()

        conn = _Connection(send_text, close, config.queue_limit)
        conn.writer_task = asyncio.ensure_future(conn.writer_loop())
        try:
            async for message in websocket:
                if isinstance(message, bytes):
                    message = message.decode("utf-8")
                if message.strip():
                    await transport.handle_line(conn, message)
        except Exception:
            pass
        finally:
            transport.disconnect(conn)

    ws_server = await ws_serve(
        ws_handler,
        host="127.0.0.1",
        port=config.ws_port,
        process_request=_static_file_responder(ui_dir) if ui_dir else None,
    )
    return transport, tcp_server, ws_server


async def serve_forever(config: ServerConfig, ui_dir: str | None = None, record_path: str | None = None) -> None:
    transport, tcp_server, ws_server = await start_servers(config, ui_dir=ui_dir, record_path=record_path)
    tcp_port = tcp_server.sockets[0].getsockname()[1]
    ws_port = next(iter(ws_server.sockets)).getsockname()[1]
    print(f"pulseboard server: tcp on 127.0.0.1:{tcp_port}, ws on 127.0.0.1:{ws_port}", flush=True)
    try:
        await asyncio.Event().wait()
    finally:
        tcp_server.close()
        ws_server.close()
