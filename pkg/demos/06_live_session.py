"""A live session over real sockets, in one process.

Starts the server on loopback ports, connects a teacher and a student over
the raw-socket binding, and walks the consent handshake: the student's
skin conductance frame reaches the teacher only once both sides share.

Run: python demos/06_live_session.py
"""

import asyncio
import json

from pulseboard import ServerConfig
from pulseboard.transport import start_servers


class Client:
    def __init__(self, reader, writer, name):
        self.reader, self.writer, self.name = reader, writer, name

    async def send(self, obj):
        self.writer.write((json.dumps(obj) + "\n").encode())
        await self.writer.drain()

    async def recv(self):
        line = await asyncio.wait_for(self.reader.readline(), timeout=5)
        msg = json.loads(line)
        print(f"  {self.name} <- {msg['type']}")
        return msg


async def main():
    config = ServerConfig(port=0, ws_port=0)
    _, tcp_server, ws_server = await start_servers(config)
    port = tcp_server.sockets[0].getsockname()[1]
    print(f"server listening on 127.0.0.1:{port} (raw socket binding)\n")

    async def connect(name, pid, role):
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        client = Client(reader, writer, name)
        await client.send({
            "v": 1, "type": "JOIN", "sid": "live-demo", "from": "",
            "payload": {"name": name, "role": role, "participant": pid},
        })
        return client

    print("teacher joins and receives the session snapshot:")
    teacher = await connect("teacher", "t", "TEACHER")
    await teacher.recv()

    print("student joins; teacher sees the presence message:")
    student = await connect("student", "s", "STUDENT")
    await student.recv()
    await teacher.recv()

    def frame(seq):
        return {
            "v": 1, "type": "SIGNAL_FRAME", "sid": "live-demo", "from": "s",
            "payload": {"participant": "s", "channel": "SC", "seq": seq, "t_ms": seq * 250, "value": 2.0 + seq / 10},
        }

    print("\nstudent streams SC before anyone consents - it echoes only to them:")
    await student.send(frame(1))
    await student.recv()

    print("\nboth toggle SC sharing on (flags are public, data stays gated until mutual):")
    for client, pid in ((teacher, "t"), (student, "s")):
        await client.send({
            "v": 1, "type": "CONSENT_SET", "sid": "live-demo", "from": pid,
            "payload": {"participant": pid, "channel": "SC", "share": True},
        })
    for client in (teacher, student):
        await client.recv()
        await client.recv()

    print("\nthe next student frame reaches both ends:")
    await student.send(frame(2))
    await student.recv()
    msg = await teacher.recv()
    print(f"  teacher sees student SC value {msg['payload']['value']}")

    teacher.writer.close()
    student.writer.close()
    tcp_server.close()
    ws_server.close()
    print("\ndone.")


if __name__ == "__main__":
    asyncio.run(main())
