"""Live session server: one operator connection drives the runtime, later
connections observe read-only. Updates stream at a fixed frame rate
decimated from the plant; slow readers drop the oldest frames rather than
ever blocking the control loop.
"""

from __future__ import annotations

import asyncio
import contextlib
from typing import Optional

from ..errors import ConfigError, ProtocolError
from ..runtime.session import RuntimeSession
from ..tasks import Task, builtin_tasks, load_task
from . import protocol


class _Client:
    def __init__(self, ws, role: str) -> None:
        self.ws = ws
        self.role = role
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=32)

    def offer(self, text: str) -> None:
        """Enqueue; drop the oldest update on backpressure."""
        while True:
            try:
                self.queue.put_nowait(text)
                return
            except asyncio.QueueFull:
                try:
                    self.queue.get_nowait()
                except asyncio.QueueEmpty:
                    pass


class SessionServer:
    """Owns one RuntimeSession and its websocket endpoint."""

    def __init__(self, task: Task, seed: int = 0,
                 frame_rate: float = 30.0) -> None:
        self.session = RuntimeSession(task, seed=seed)
        self.seed = seed
        self.frame_rate = frame_rate
        self._clients: list[_Client] = []
        self._operator: Optional[_Client] = None
        self._stop = asyncio.Event()

    # Connection handling --------------------------------------------------------

    async def _handler(self, ws) -> None:
        role = "operator" if self._operator is None else "readonly"
        client = _Client(ws, role)
        if role == "operator":
            self._operator = client
        self._clients.append(client)
        sender = asyncio.create_task(self._sender(client))
        try:
            await ws.send(protocol.encode(
                protocol.hello(role, builtin_tasks())))
            await ws.send(protocol.encode(self.session.params_snapshot()))
            async for text in ws:
                await self._on_message(client, text)
        except Exception:
            pass
        finally:
            sender.cancel()
            self._clients.remove(client)
            if self._operator is client:
                self._operator = None

    async def _sender(self, client: _Client) -> None:
        while True:
            text = await client.queue.get()
            await client.ws.send(text)

    async def _on_message(self, client: _Client, text: str) -> None:
        try:
            cmd = protocol.decode_command(text)
        except ProtocolError as exc:
            cmd_id = -1
            try:
                import json
                raw = json.loads(text)
                if isinstance(raw, dict) and isinstance(raw.get("id"), int):
                    cmd_id = raw["id"]
            except Exception:
                pass
            await client.ws.send(protocol.encode(
                protocol.nack(cmd_id, f"parse error: {exc}")))
            return
        if client is not self._operator:
            await client.ws.send(protocol.encode(
                protocol.nack(cmd["id"], "read-only")))
            return
        if cmd["type"] == "start_task":
            await self._start_task(client, cmd)
            return
        ok, result = await asyncio.to_thread(self.session.apply_command, cmd)
        if ok:
            await client.ws.send(protocol.encode(
                protocol.ack(cmd["id"], result or None)))
        else:
            await client.ws.send(protocol.encode(
                protocol.nack(cmd["id"], str(result))))

    async def _start_task(self, client: _Client, cmd: dict) -> None:
        try:
            task = load_task(cmd["task"])
        except ConfigError as exc:
            await client.ws.send(protocol.encode(
                protocol.nack(cmd["id"], str(exc))))
            return
        old = self.session
        new = RuntimeSession(task, seed=self.seed)
        new.start()
        self.session = new
        await asyncio.to_thread(old.stop)
        await client.ws.send(protocol.encode(
            protocol.ack(cmd["id"], {"task": task.name})))
        for c in self._clients:
            c.offer(protocol.encode(self.session.params_snapshot()))

    # Streaming ------------------------------------------------------------------

    async def _stream(self) -> None:
        period = 1.0 / self.frame_rate
        while not self._stop.is_set():
            snap = await asyncio.to_thread(self.session.snapshot)
            frames = [protocol.encode(snap["frame"])]
            if not snap["frame"]["paused"]:
                frames.append(protocol.encode(snap["cost"]))
                frames += [protocol.encode(ev)
                           for ev in self.session.pop_events()
                           if ev["type"] == "telemetry"]
            for client in list(self._clients):
                for text in frames:
                    client.offer(text)
            await asyncio.sleep(period)

    # Entry ----------------------------------------------------------------------

    async def serve(self, host: str, port: int) -> None:
        import websockets

        self.session.start()
        stream = asyncio.create_task(self._stream())
        try:
            async with websockets.serve(self._handler, host, port):
                await self._stop.wait()
        finally:
            stream.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await stream
            await asyncio.to_thread(self.session.stop)

    def shutdown(self) -> None:
        self._stop.set()


def serve_session(task: Task, host: str = "127.0.0.1", port: int = 8765,
                  seed: int = 0) -> None:
    """Blocking entry point: serve one interactive session."""
    server = SessionServer(task, seed=seed)
    try:
        asyncio.run(server.serve(host, port))
    except KeyboardInterrupt:
        pass
