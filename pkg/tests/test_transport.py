from __future__ import annotations

import asyncio
import json
import urllib.request

import pytest

from pulseboard.config import ServerConfig
from pulseboard.protocol import Envelope
from pulseboard.transport import OutboundQueue, start_servers


def run(coro):
    return asyncio.run(asyncio.wait_for(coro, timeout=15))


class TcpClient:
    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer

    @classmethod
    async def connect(cls, port: int) -> "TcpClient":
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        return cls(reader, writer)

    async def send(self, obj: dict) -> None:
        self.writer.write((json.dumps(obj) + "\n").encode())
        await self.writer.drain()

    async def recv(self) -> dict:
        line = await asyncio.wait_for(self.reader.readline(), timeout=5)
        assert line, "connection closed"
        return json.loads(line)

    async def recv_type(self, mtype: str) -> dict:
        while True:
            msg = await self.recv()
            if msg["type"] == mtype:
                return msg

    def close(self) -> None:
        self.writer.close()


def join_msg(sid, pid, role, name=None):
    return {
        "v": 1, "type": "JOIN", "sid": sid, "from": "",
        "payload": {"name": name or pid, "role": role, "participant": pid},
    }


async def started_servers():
    cfg = ServerConfig(port=0, ws_port=0)
    transport, tcp_server, ws_server = await start_servers(cfg)
    tcp_port = tcp_server.sockets[0].getsockname()[1]
    ws_port = next(iter(ws_server.sockets)).getsockname()[1]
    return transport, tcp_server, ws_server, tcp_port, ws_port


class TestTcpBinding:
    def test_join_snapshot_and_presence(self):
        async def scenario():
            _, tcp_server, ws_server, port, _ = await started_servers()
            try:
                teacher = await TcpClient.connect(port)
                await teacher.send(join_msg("s1", "t", "TEACHER"))
                snap = await teacher.recv()
                assert snap["type"] == "SNAPSHOT"
                assert snap["payload"]["lesson"]["phase"] == "INTRO"

                student = await TcpClient.connect(port)
                await student.send(join_msg("s1", "s", "STUDENT"))
                ssnap = await student.recv()
                assert {p["id"] for p in ssnap["payload"]["roster"]} == {"t", "s"}
                presence = await teacher.recv()
                assert presence["type"] == "PRESENCE"
                assert presence["payload"]["participant"] == "s"
                teacher.close(); student.close()
            finally:
                tcp_server.close(); ws_server.close()

        run(scenario())

    def test_frame_gating_over_the_wire(self):
        async def scenario():
            _, tcp_server, ws_server, port, _ = await started_servers()
            try:
                teacher = await TcpClient.connect(port)
                await teacher.send(join_msg("s1", "t", "TEACHER"))
                await teacher.recv()
                student = await TcpClient.connect(port)
                await student.send(join_msg("s1", "s", "STUDENT"))
                await student.recv()
                await teacher.recv()  # presence

                frame = {
                    "v": 1, "type": "SIGNAL_FRAME", "sid": "s1", "from": "t",
                    "payload": {"participant": "t", "channel": "SC", "seq": 1, "t_ms": 0, "value": 2.0},
                }
                await teacher.send(frame)
                echo = await teacher.recv()
                assert echo["type"] == "SIGNAL_FRAME"  # self always allowed

                # Student must not see it; a PING round-trip proves ordering.
                await student.send({"v": 1, "type": "PING", "sid": "s1", "from": "s", "payload": {"n": 1}})
                nxt = await student.recv()
                assert nxt["type"] == "PONG"

                for pid, client in (("t", teacher), ("s", student)):
                    await client.send({
                        "v": 1, "type": "CONSENT_SET", "sid": "s1", "from": pid,
                        "payload": {"participant": pid, "channel": "SC", "share": True},
                    })
                for client in (teacher, student):
                    await client.recv_type("CONSENT_STATE")
                    await client.recv_type("CONSENT_STATE")

                frame["payload"]["seq"] = 2
                await teacher.send(frame)
                got = await student.recv_type("SIGNAL_FRAME")
                assert got["payload"]["value"] == 2.0
                teacher.close(); student.close()
            finally:
                tcp_server.close(); ws_server.close()

        run(scenario())

    def test_duplicate_teacher_rejected_and_closed(self):
        async def scenario():
            _, tcp_server, ws_server, port, _ = await started_servers()
            try:
                teacher = await TcpClient.connect(port)
                await teacher.send(join_msg("s1", "t", "TEACHER"))
                await teacher.recv()
                rival = await TcpClient.connect(port)
                await rival.send(join_msg("s1", "t2", "TEACHER"))
                err = await rival.recv()
                assert err["type"] == "ERROR"
                assert err["payload"]["code"] == "duplicate-teacher"
                leftover = await rival.reader.read()
                assert leftover == b""
                teacher.close()
            finally:
                tcp_server.close(); ws_server.close()

        run(scenario())

    def test_disconnect_emits_leave_presence(self):
        async def scenario():
            _, tcp_server, ws_server, port, _ = await started_servers()
            try:
                teacher = await TcpClient.connect(port)
                await teacher.send(join_msg("s1", "t", "TEACHER"))
                await teacher.recv()
                student = await TcpClient.connect(port)
                await student.send(join_msg("s1", "s", "STUDENT"))
                await student.recv()
                await teacher.recv()
                student.close()
                gone = await teacher.recv_type("PRESENCE")
                assert gone["payload"] == {"participant": "s", "event": "leave"}
            finally:
                tcp_server.close(); ws_server.close()

        run(scenario())


class TestWsBinding:
    def test_ws_join_and_ping(self):
        async def scenario():
            import websockets

            _, tcp_server, ws_server, _, ws_port = await started_servers()
            try:
                async with websockets.connect(f"ws://127.0.0.1:{ws_port}/ws") as ws:
                    await ws.send(json.dumps(join_msg("w1", "t", "TEACHER")))
                    snap = json.loads(await asyncio.wait_for(ws.recv(), 5))
                    assert snap["type"] == "SNAPSHOT"
                    await ws.send(json.dumps({"v": 1, "type": "PING", "sid": "w1", "from": "t", "payload": {"k": 2}}))
                    pong = json.loads(await asyncio.wait_for(ws.recv(), 5))
                    assert pong["type"] == "PONG"
                    assert pong["payload"] == {"k": 2}
            finally:
                tcp_server.close(); ws_server.close()

        run(scenario())

    def test_static_files_served(self, tmp_path):
        async def scenario():
            (tmp_path / "index.html").write_text("<html>board</html>")
            cfg = ServerConfig(port=0, ws_port=0)
            transport, tcp_server, ws_server = await start_servers(cfg, ui_dir=str(tmp_path))
            ws_port = next(iter(ws_server.sockets)).getsockname()[1]
            try:
                def fetch():
                    with urllib.request.urlopen(f"http://127.0.0.1:{ws_port}/") as resp:
                        return resp.read().decode(), resp.headers.get("Content-Type")

                body, ctype = await asyncio.get_event_loop().run_in_executor(None, fetch)
                assert "board" in body
                assert ctype.startswith("text/html")
            finally:
                tcp_server.close(); ws_server.close()

        run(scenario())


class TestOutboundQueue:
    def envelope(self, mtype="SIGNAL_FRAME", channel="SC", seq=None):
        payload = {"participant": "p", "channel": channel, "seq": 1, "t_ms": 0, "value": 1.0}
        if mtype != "SIGNAL_FRAME":
            payload = {}
        return Envelope(type=mtype, sid="s", sender="p", payload=payload, seq=seq)

    def test_frames_evicted_oldest_first_per_channel(self):
        async def scenario():
            q = OutboundQueue(limit=4)
            for i in range(4):
                assert q.put(self.envelope(channel="SC" if i % 2 == 0 else "BVP"))
            assert q.put(self.envelope(channel="SC"))
            assert len(q.items) == 4
            channels = [e.payload.get("channel") for e in q.items]
            assert channels == ["BVP", "SC", "BVP", "SC"]

        run(scenario())

    def test_sequenced_never_dropped_queue_closes(self):
        async def scenario():
            q = OutboundQueue(limit=2)
            assert q.put(self.envelope(mtype="PRESENCE", seq=1))
            assert q.put(self.envelope(mtype="PRESENCE", seq=2))
            assert not q.put(self.envelope(mtype="PRESENCE", seq=3))
            assert q.overflowed

        run(scenario())

    def test_sequenced_evicts_frames_first(self):
        async def scenario():
            q = OutboundQueue(limit=2)
            assert q.put(self.envelope(channel="SC"))
            assert q.put(self.envelope(mtype="PRESENCE", seq=1))
            assert q.put(self.envelope(mtype="PRESENCE", seq=2))
            types = [e.type for e in q.items]
            assert types == ["PRESENCE", "PRESENCE"]
            assert not q.overflowed

        run(scenario())

    def test_incoming_frame_dropped_when_nothing_evictable(self):
        async def scenario():
            q = OutboundQueue(limit=1)
            assert q.put(self.envelope(mtype="PRESENCE", seq=1))
            assert q.put(self.envelope())  # dropped silently
            assert len(q.items) == 1

        run(scenario())
