"""Network face of the gateway: WebSocket envelope bridge, console hosting,
report download, and the optional synchrophasor TCP side channel.

Each WebSocket frame is one envelope document {topic, seq, wall_ts, sim_ts,
retain, payload}. Clients may only send subscription control frames
({op: sub|unsub, filter}) and envelopes on command topics; everything else
is refused. Outbound traffic is pumped from the broker's per-subscription
queues by one thread each, so a slow socket can never stall the engine.
"""

from __future__ import annotations

import asyncio
import json
import logging
import socket
import struct
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse

from .broker import Broker, FilterError
from .engine import Measurements
from .gateway import Gateway
from .phasor import encode_data_frame

logger = logging.getLogger(__name__)

MERGED_QUEUE_LIMIT = 4096


class WireContext:
    """Everything the HTTP/WS layer serves: gateway, mode, static assets."""

    def __init__(self, gateway: Gateway, broker: Broker, mode: str = "live",
                 static_dir: Optional[Path] = None,
                 replay_handler=None):
        self.gateway = gateway
        self.broker = broker
        self.mode = mode
        self.static_dir = static_dir
        self.replay_handler = replay_handler  # callable(record_text) -> None, replay mode only


def create_app(ctx: WireContext) -> FastAPI:
    app = FastAPI(title="gridops gateway", docs_url=None, redoc_url=None)

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "mode": ctx.mode}

    @app.get("/report")
    def report():
        provider = ctx.gateway.report_provider
        return JSONResponse(provider() if provider else {})

    @app.post("/replay")
    async def replay_upload(request: Request):
        if ctx.mode != "replay" or ctx.replay_handler is None:
            return JSONResponse({"error": "server is not in replay mode"}, status_code=409)
        body = await request.body()
        try:
            ctx.replay_handler(body.decode("utf-8"))
        except Exception as e:  # surfacing refusal reasons to the uploader
            return JSONResponse({"error": str(e)}, status_code=400)
        return {"ok": True}

    @app.get("/")
    def index():
        if ctx.static_dir and (ctx.static_dir / "index.html").exists():
            return FileResponse(ctx.static_dir / "index.html")
        return PlainTextResponse(
            "gridops gateway is running; no console assets found "
            "(build the frontend or connect over /ws)."
        )

    @app.get("/static/{path:path}")
    def static(path: str):
        if not ctx.static_dir:
            return PlainTextResponse("no static dir", status_code=404)
        root = (ctx.static_dir / "static").resolve()
        target = (root / path).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            return PlainTextResponse("not found", status_code=404)
        return FileResponse(target)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket, token: str = Query(default="")):
        try:
            client_id = f"{ws.client.host}:{ws.client.port}" if ws.client else "ws-client"
            session = ctx.gateway.attach_client(client_id, token)
        except PermissionError as e:
            await ws.close(code=4401, reason=str(e))
            return
        await ws.accept()
        loop = asyncio.get_running_loop()
        outbound: asyncio.Queue = asyncio.Queue()
        pumps: list[threading.Thread] = []
        stop = threading.Event()

        def pump(fsub):
            while not stop.is_set() and fsub.alive:
                envlp = fsub.get(timeout=0.25)
                if envlp is None:
                    continue
                if outbound.qsize() > MERGED_QUEUE_LIMIT:
                    stop.set()
                    loop.call_soon_threadsafe(outbound.put_nowait, None)
                    return
                loop.call_soon_threadsafe(outbound.put_nowait, envlp.to_doc())

        def start_pump(pattern: str):
            fsub = session.subscribe(pattern)
            t = threading.Thread(target=pump, args=(fsub,), daemon=True,
                                 name=f"ws-pump-{pattern}")
            t.start()
            pumps.append(t)

        async def writer():
            while True:
                doc = await outbound.get()
                if doc is None:
                    await ws.close(code=1013, reason="outbound queue overflow")
                    return
                await ws.send_text(json.dumps(doc))

        writer_task = asyncio.create_task(writer())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    doc = json.loads(text)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps({"error": "frame is not JSON"}))
                    continue
                op = doc.get("op")
                if op == "sub":
                    try:
                        start_pump(str(doc.get("filter", "")))
                    except FilterError as e:
                        await ws.send_text(json.dumps({"error": str(e)}))
                elif op == "unsub":
                    session.unsubscribe(str(doc.get("filter", "")))
                elif op is not None:
                    await ws.send_text(json.dumps({"error": f"unknown op {op!r}"}))
                else:
                    try:
                        ctx.gateway.handle_client_envelope(session, doc)
                    except PermissionError as e:
                        await ws.send_text(json.dumps({"error": str(e)}))
        except WebSocketDisconnect:
            pass
        finally:
            stop.set()
            writer_task.cancel()
            session.close()

    return app


def run_server_in_thread(app: FastAPI, host: str, port: int):
    """Start uvicorn on a daemon thread; returns (server, thread)."""
    import uvicorn

    config = uvicorn.Config(app, host=host, port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True, name="gateway-http")
    thread.start()
    return server, thread


class PhasorStreamer:
    """Length-delimited binary measurement frames over a TCP port.

    Every simulation step emits one data frame per connected client:
    4-byte big-endian length prefix, then the frame. Channel set is the
    first `channels` buses' voltage phasors.
    """

    def __init__(self, port: int, idcode: int = 1, channels: int = 32, host: str = "0.0.0.0"):
        self.idcode = idcode
        self.channels = channels
        self._clients: list[socket.socket] = []
        self._lock = threading.Lock()
        self._srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._srv.bind((host, port))
        self._srv.listen(8)
        self.port = self._srv.getsockname()[1]
        self._accepting = True
        threading.Thread(target=self._accept_loop, daemon=True, name="phasor-accept").start()

    def _accept_loop(self):
        while self._accepting:
            try:
                conn, _ = self._srv.accept()
            except OSError:
                return
            with self._lock:
                self._clients.append(conn)

    def send(self, m: Measurements) -> None:
        n = min(self.channels, len(m.v_pu))
        phasors = list(zip(m.v_pu[:n], m.angle_rad[:n]))
        soc = int(m.sim_time)
        fraction = int(round((m.sim_time - soc) * (1 << 24))) & 0xFFFFFF
        frame = encode_data_frame(phasors, self.idcode, soc, fraction,
                                  freq_dev=m.freq_dev_hz)
        blob = struct.pack(">I", len(frame)) + frame
        with self._lock:
            dead = []
            for conn in self._clients:
                try:
                    conn.sendall(blob)
                except OSError:
                    dead.append(conn)
            for conn in dead:
                self._clients.remove(conn)
                conn.close()

    def close(self) -> None:
        self._accepting = False
        try:
            self._srv.close()
        except OSError:
            pass
        with self._lock:
            for conn in self._clients:
                conn.close()
            self._clients.clear()
