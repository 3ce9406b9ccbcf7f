"""HTTP/WebSocket surface for the gateway.

GET /status returns thing states as JSON; /ws frames the line protocol over a
WebSocket: each text message is one wire line, replies and EVT fan-out come
back as text messages. The first line on a socket must be HELLO.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from pervadia.engine import Engine
from pervadia.errors import AuthFailedError, ProtocolError
from pervadia.gateway import DeviceDescriptor, format_line, parse_line


def build_app(engine: Engine, tick_realtime: bool = False) -> FastAPI:
    app = FastAPI(title="pervadia gateway")
    lock = threading.Lock()

    @app.get("/status")
    def status() -> dict:
        with lock:
            return engine.gateway.status()

    @app.get("/view/{name}")
    def view(name: str) -> list:
        with lock:
            return engine.views.query(name, engine.world, "admin")

    @app.websocket("/ws")
    async def ws(socket: WebSocket) -> None:
        await socket.accept()
        session = None
        try:
            while True:
                raw = await socket.receive_text()
                if session is None:
                    reply = _handshake(engine, lock, raw)
                    if isinstance(reply, str):
                        await socket.send_text(reply)
                        continue
                    session = reply
                    outbox: list[str] = []
                    session.transport = outbox.append
                    await socket.send_text(
                        format_line("EVT", kind="welcome", session=session.id,
                                    avatar=session.avatar, role=session.role)
                    )
                    continue
                with lock:
                    outbox.clear()
                    replies = engine.gateway.handle_line(session, raw)
                for line in replies + outbox:
                    await socket.send_text(line)
        except WebSocketDisconnect:
            if session is not None:
                session.detach()

    if tick_realtime:
        _start_ticker(app, engine, lock)
    return app


def _handshake(engine: Engine, lock: threading.Lock, raw: str):
    try:
        _, verb, fields = parse_line(raw)
    except ProtocolError as exc:
        return format_line("ERR", reason="parse-error", detail=str(exc))
    if verb != "HELLO":
        return format_line("ERR", reason="protocol-error", detail="expected HELLO first")
    try:
        with lock:
            return engine.gateway.open_session(
                fields.get("name", ""), fields.get("pass", ""),
                DeviceDescriptor(device_class=fields.get("device", "web")),
                proxied=fields.get("proxied") == "true",
                protocol_version=fields.get("version", "1"),
            )
    except AuthFailedError as exc:
        return format_line("ERR", reason="auth-failed", detail=str(exc))
    except ProtocolError as exc:
        return format_line("ERR", reason="protocol-version-mismatch", detail=str(exc))


def _start_ticker(app: FastAPI, engine: Engine, lock: threading.Lock) -> None:
    stop = threading.Event()

    def ticker() -> None:
        while not stop.wait(engine.world.tick_period / 1000.0):
            with lock:
                engine.tick()

    thread = threading.Thread(target=ticker, daemon=True)

    @app.on_event("startup")
    def _startup() -> None:
        thread.start()

    @app.on_event("shutdown")
    def _shutdown() -> None:
        stop.set()
