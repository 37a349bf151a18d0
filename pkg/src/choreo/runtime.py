"""Live-coding daemon: watch, recompile, stream.

One process owns the session: a file watcher debounces saves and
recompiles, a playback clock broadcasts frames on a wall clock, and
connection handlers fan those broadcasts out read-only.  The three
activities talk only through the event loop and one command queue, so
compiler state never needs a lock.

The wire protocol is newline-delimited UTF-8 JSON.  The same port accepts
three kinds of client: raw TCP (one JSON object per LF line), browsers via
the standard socket upgrade (one JSON object per text message), and plain
HTTP GETs for the studio's static assets.  A failed compile never
interrupts the stream: the last good trajectory keeps playing until a good
one replaces it.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import math
import mimetypes
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .notation import Diagnostic, ParseFailure, Severity, parse
from .platform import ECL, PlatformSpec, fk_full, load_ecl, load_platform
from .score import Call, PlaylistEntry, Score, Span, TransformOp, Axis
from .synth import (
    CompileError,
    CompiledScore,
    DEFAULT_FRAME_RATE,
    Trajectory,
    compile_score,
    flatten,
)

DEBOUNCE_S = 0.050
CROSSFADE_S = 0.200
WATCH_POLL_S = 0.015
SNIFF_TIMEOUT_S = 0.150

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

_TRANSFORMS = {
    "retrograde": (TransformOp.RETROGRADE, ()),
    "mirror_x": (TransformOp.MIRROR, (Axis.X,)),
    "mirror_y": (TransformOp.MIRROR, (Axis.Y,)),
    "mirror_z": (TransformOp.MIRROR, (Axis.Z,)),
}


@dataclass
class CompileReport:
    ok: bool
    latency_ms: float
    diagnostics: list
    trace_len: int
    trajectory_id: int

    def to_message(self) -> dict:
        return {
            "type": "compile",
            "ok": self.ok,
            "latency_ms": round(self.latency_ms, 3),
            "diagnostics": [_diag_to_wire(d) for d in self.diagnostics],
            "trajectory_id": self.trajectory_id,
        }


def _diag_to_wire(d: Diagnostic) -> dict:
    return {
        "severity": d.severity.value,
        "message": d.message,
        "line": d.span.line,
        "column": d.span.column,
        "length": d.span.length,
    }


@dataclass
class SessionState:
    mode: str = "playing"  # playing | paused
    tempo_multiplier: float = 1.0
    playhead: float = 0.0
    trajectory_id: int = 0

    def to_message(self) -> dict:
        return {
            "type": "state",
            "mode": self.mode,
            "tempo_multiplier": self.tempo_multiplier,
            "playhead": round(self.playhead, 6),
        }


def hot_swap(old: Optional[Trajectory], new: Trajectory, playhead: float) -> float:
    """Map the playhead onto a new trajectory at the same fraction of its
    total duration."""
    if old is None or old.duration <= 0 or new.duration <= 0:
        return 0.0
    frac = min(1.0, max(0.0, playhead / old.duration))
    return frac * new.duration


def wrap_playlist(score: Score, name: str) -> Score:
    """Apply a named transform to the whole playlist in memory.

    Retrograde reverses entry order and wraps each expression (retrograde
    distributes over concatenation that way); mirrors wrap in place.
    """
    op, extra = _TRANSFORMS[name]
    entries = [
        PlaylistEntry(Call(op, (e.expr,) + extra), e.loop, e.span)
        for e in score.playlist
    ]
    if op is TransformOp.RETROGRADE:
        entries.reverse()
    return Score(score.tempo, score.platform_ref, score.phrases, tuple(entries))


class _Client:
    """One connected peer; `send` enqueues, a writer task drains."""

    def __init__(self, writer: asyncio.StreamWriter, encode):
        self.writer = writer
        self.encode = encode  # dict -> bytes (line or ws frame)
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=512)
        self.closed = False

    def send(self, message: dict) -> None:
        if self.closed:
            return
        try:
            self.queue.put_nowait(message)
        except asyncio.QueueFull:
            # Slow consumer.  Frames are ephemeral, so a new frame is simply
            # dropped; anything else displaces the oldest queued message.
            if message.get("type") == "frame":
                return
            try:
                self.queue.get_nowait()
                self.queue.put_nowait(message)
            except (asyncio.QueueEmpty, asyncio.QueueFull):
                pass

    async def drain(self) -> None:
        while True:
            message = await self.queue.get()
            if message is None:
                break
            self.writer.write(self.encode(message))
            await self.writer.drain()


class Daemon:
    """The live session.  Construct, then `await run()` (or use
    `DaemonThread` from synchronous code)."""

    def __init__(
        self,
        score_path,
        platform_path,
        ecl_path,
        port: int = 7770,
        rate: float = DEFAULT_FRAME_RATE,
        ui_dir=None,
        host: str = "127.0.0.1",
    ):
        self.score_path = Path(score_path)
        self.platform_path = Path(platform_path)
        self.ecl_path = Path(ecl_path)
        self.port = port
        self.host = host
        self.rate = rate
        self.ui_dir = Path(ui_dir) if ui_dir else None

        if not self.score_path.exists():
            raise FileNotFoundError(f"score file {self.score_path} does not exist")
        self.spec: PlatformSpec = load_platform(self.platform_path)
        self.ecl: ECL = load_ecl(self.ecl_path, self.spec)

        self.session = SessionState()
        self.compiled: Optional[CompiledScore] = None
        self.last_score: Optional[Score] = None
        self.last_report: Optional[CompileReport] = None

        self.clients: dict[int, _Client] = {}
        self._next_client = 0
        self._commands: asyncio.Queue = asyncio.Queue()
        self._t0 = 0.0
        self._fade_from: Optional[np.ndarray] = None
        self._fade_start = 0.0
        self.bound_port: Optional[int] = None
        self.ready = asyncio.Event()
        self._stop = asyncio.Event()

    # -- compilation ------------------------------------------------------

    def _compile_text(self, text: str) -> CompileReport:
        started = time.perf_counter()
        diagnostics: list[Diagnostic] = []
        compiled = None
        score = None
        try:
            score = parse(text)
            compiled = compile_score(score, self.spec, self.ecl, self.rate)
        except ParseFailure as f:
            diagnostics = list(f.diagnostics)
        except CompileError as e:
            trace = flatten(score)
            for index, missing in e.missing:
                span = trace.entries[index].span
                diagnostics.append(
                    Diagnostic(Severity.ERROR, str(missing), span or Span(1, 1))
                )
        latency_ms = (time.perf_counter() - started) * 1000.0
        ok = compiled is not None
        report = CompileReport(
            ok=ok,
            latency_ms=latency_ms,
            diagnostics=diagnostics,
            trace_len=len(compiled.trace.entries) if ok else 0,
            trajectory_id=self.session.trajectory_id + (1 if ok else 0),
        )
        if ok:
            self._install(compiled, score)
        self.last_report = report
        return report

    def _compile_score_object(self, score: Score) -> CompileReport:
        started = time.perf_counter()
        diagnostics: list[Diagnostic] = []
        compiled = None
        try:
            compiled = compile_score(score, self.spec, self.ecl, self.rate)
        except CompileError as e:
            diagnostics = [
                Diagnostic(Severity.ERROR, str(m), Span(1, 1)) for _, m in e.missing
            ]
        except ValueError as e:
            diagnostics = [Diagnostic(Severity.ERROR, str(e), Span(1, 1))]
        latency_ms = (time.perf_counter() - started) * 1000.0
        ok = compiled is not None
        report = CompileReport(
            ok, latency_ms, diagnostics,
            len(compiled.trace.entries) if ok else 0,
            self.session.trajectory_id + (1 if ok else 0),
        )
        if ok:
            self._install(compiled, score)
        self.last_report = report
        return report

    def _install(self, compiled: CompiledScore, score: Optional[Score]) -> None:
        old = self.compiled.trajectory if self.compiled else None
        if old is not None:
            self._fade_from = self._current_q()
            self._fade_start = self._now()
        self.session.playhead = hot_swap(old, compiled.trajectory, self.session.playhead)
        self.session.trajectory_id += 1
        self.compiled = compiled
        if score is not None:
            self.last_score = score

    # -- playback ---------------------------------------------------------

    def _now(self) -> float:
        try:
            return asyncio.get_running_loop().time()
        except RuntimeError:
            return time.monotonic()  # unit tests drive the daemon directly

    def _current_q(self) -> Optional[np.ndarray]:
        if self.compiled is None:
            return None
        traj = self.compiled.trajectory
        return traj.frames_q[traj.frame_at(self.session.playhead)]

    def _tick(self, dt: float) -> Optional[dict]:
        """Advance the playhead and build one frame message, or None."""
        if self.compiled is None or self.session.mode != "playing":
            return None
        traj = self.compiled.trajectory
        head = self.session.playhead + dt * self.session.tempo_multiplier
        if head > traj.duration:
            if traj.loop and traj.duration > traj.loop_start:
                span = traj.duration - traj.loop_start
                head = traj.loop_start + (head - traj.loop_start) % span
            else:
                head = traj.duration
                self.session.mode = "paused"
                self._broadcast(self.session.to_message())
        self.session.playhead = head
        idx = traj.frame_at(head)
        q = traj.frames_q[idx]
        now = self._now()
        if self._fade_from is not None:
            s = (now - self._fade_start) / CROSSFADE_S
            if s >= 1.0:
                self._fade_from = None
            else:
                if len(self._fade_from) == len(q):
                    q = self._fade_from + (q - self._fade_from) * s
                else:
                    self._fade_from = None
        endpoints = fk_full(self.spec, q).endpoints
        return {
            "type": "frame",
            "trajectory_id": self.session.trajectory_id,
            "t": round(now - self._t0, 6),
            "q": [round(float(x), 9) for x in q],
            "endpoints": [[round(float(c), 9) for c in p] for p in endpoints],
            "trace_index": int(traj.trace_index[idx]),
        }

    # -- control ----------------------------------------------------------

    def handle_control(self, msg: dict) -> tuple[bool, Optional[str]]:
        """Apply one control message.  Returns (state_changed, error)."""
        if not isinstance(msg, dict) or msg.get("type") != "control":
            return False, "expected a control message"
        op = msg.get("op")
        value = msg.get("value")
        if op == "play":
            self.session.mode = "playing"
            return True, None
        if op == "pause":
            self.session.mode = "paused"
            return True, None
        if op == "tempo":
            try:
                mult = float(value)
            except (TypeError, ValueError):
                return False, f"tempo needs a number, got {value!r}"
            if not (mult > 0 and math.isfinite(mult)):
                return False, f"tempo multiplier must be positive, got {value!r}"
            self.session.tempo_multiplier = mult
            return True, None
        if op == "seek":
            try:
                head = float(value)
            except (TypeError, ValueError):
                return False, f"seek needs seconds, got {value!r}"
            duration = self.compiled.trajectory.duration if self.compiled else 0.0
            if head >= duration:
                self.session.playhead = duration
                self.session.mode = "paused"
            else:
                self.session.playhead = max(0.0, head)
            return True, None
        if op == "apply_transform":
            if value not in _TRANSFORMS:
                known = ", ".join(sorted(_TRANSFORMS))
                return False, f"unknown transform {value!r} (one of: {known})"
            if self.last_score is None:
                return False, "nothing compiled yet"
            report = self._compile_score_object(wrap_playlist(self.last_score, value))
            self._broadcast(report.to_message())
            return report.ok, None if report.ok else "transform failed to compile"
        return False, f"unknown control op {op!r}"

    # -- broadcast / serving ----------------------------------------------

    def _broadcast(self, message: dict) -> None:
        for client in list(self.clients.values()):
            client.send(message)

    def _hello(self) -> dict:
        return {
            "type": "hello",
            "platform": self.spec.to_dict(),
            "rate": self.rate,
        }

    async def run(self) -> None:
        """Serve until stop() is called."""
        loop = asyncio.get_running_loop()
        self._t0 = loop.time()
        server = await asyncio.start_server(self._on_connection, self.host, self.port)
        self.bound_port = server.sockets[0].getsockname()[1]

        # Initial compile may fail; the daemon then waits for edits.
        self._compile_text(self.score_path.read_text(encoding="utf-8"))

        tasks = [
            asyncio.ensure_future(self._watch()),
            asyncio.ensure_future(self._clock()),
            asyncio.ensure_future(self._session_loop()),
        ]
        self.ready.set()
        try:
            await self._stop.wait()
        finally:
            for t in tasks:
                t.cancel()
            server.close()
            await server.wait_closed()
            for client in list(self.clients.values()):
                client.closed = True

    def stop(self) -> None:
        self._stop.set()

    async def _watch(self) -> None:
        def stamp():
            try:
                st = self.score_path.stat()
                return (st.st_mtime_ns, st.st_size)
            except OSError:
                return None

        last = stamp()
        pending_since: Optional[float] = None
        while True:
            await asyncio.sleep(WATCH_POLL_S)
            now = time.monotonic()
            current = stamp()
            if current != last:
                last = current
                pending_since = now
            if pending_since is not None and now - pending_since >= DEBOUNCE_S:
                pending_since = None
                await self._commands.put(("recompile", None))

    async def _session_loop(self) -> None:
        while True:
            kind, payload = await self._commands.get()
            if kind == "recompile":
                try:
                    text = self.score_path.read_text(encoding="utf-8")
                except OSError:
                    continue
                report = self._compile_text(text)
                self._broadcast(report.to_message())
                self._broadcast(self.session.to_message())
            elif kind == "control":
                client_id, msg = payload
                changed, error = self.handle_control(msg)
                if error is not None:
                    client = self.clients.get(client_id)
                    if client:
                        client.send({"type": "error", "message": error})
                elif changed:
                    self._broadcast(self.session.to_message())

    async def _clock(self) -> None:
        interval = 1.0 / self.rate
        loop = asyncio.get_running_loop()
        next_at = loop.time() + interval
        last = loop.time()
        while True:
            delay = next_at - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            next_at += interval
            now = loop.time()
            dt, last = now - last, now
            message = self._tick(dt)
            if message is not None:
                self._broadcast(message)

    # -- connection handling ----------------------------------------------

    async def _on_connection(self, reader, writer) -> None:
        try:
            head = await asyncio.wait_for(reader.read(4), SNIFF_TIMEOUT_S)
        except asyncio.TimeoutError:
            head = b""
        except (ConnectionError, OSError):
            return
        try:
            if head.startswith(b"GET") and len(head) >= 3:
                await self._serve_http(reader, writer, head)
            else:
                await self._serve_ndjson(reader, writer, head)
        except (ConnectionError, OSError, asyncio.IncompleteReadError):
            pass
        finally:
            try:
                writer.close()
                await writer.wait_closed()
            except Exception:
                pass

    def _register(self, writer, encode) -> tuple[int, _Client]:
        client = _Client(writer, encode)
        client_id = self._next_client
        self._next_client += 1
        self.clients[client_id] = client
        client.send(self._hello())
        if self.last_report is not None:
            client.send(self.last_report.to_message())
        client.send(self.session.to_message())
        return client_id, client

    def _unregister(self, client_id: int) -> None:
        client = self.clients.pop(client_id, None)
        if client:
            client.closed = True
            try:
                client.queue.put_nowait(None)
            except asyncio.QueueFull:
                pass

    async def _serve_ndjson(self, reader, writer, head: bytes) -> None:
        encode = lambda m: (json.dumps(m, separators=(",", ":")) + "\n").encode()
        client_id, client = self._register(writer, encode)
        drain = asyncio.ensure_future(client.drain())
        buffer = head
        try:
            while True:
                chunk = await reader.read(4096)
                if not chunk:
                    break
                buffer += chunk
                while b"\n" in buffer:
                    line, buffer = buffer.split(b"\n", 1)
                    await self._on_client_line(client_id, client, line)
        finally:
            self._unregister(client_id)
            drain.cancel()

    async def _on_client_line(self, client_id, client, line: bytes) -> None:
        line = line.strip()
        if not line:
            return
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            client.send({"type": "error", "message": "malformed JSON"})
            return
        await self._commands.put(("control", (client_id, msg)))

    # -- HTTP / browser socket --------------------------------------------

    async def _serve_http(self, reader, writer, head: bytes) -> None:
        raw = head + await reader.readuntil(b"\r\n\r\n")
        request, _, _ = raw.partition(b"\r\n\r\n")
        lines = request.decode("latin-1").split("\r\n")
        try:
            method, path, _ = lines[0].split(" ", 2)
        except ValueError:
            return
        headers = {}
        for line in lines[1:]:
            if ":" in line:
                k, v = line.split(":", 1)
                headers[k.strip().lower()] = v.strip()

        if headers.get("upgrade", "").lower() == "websocket":
            await self._serve_websocket(reader, writer, headers)
        elif method == "GET":
            self._serve_static(writer, path)
            await writer.drain()

    def _serve_static(self, writer, path: str) -> None:
        def respond(status: str, body: bytes, ctype: str = "text/plain") -> None:
            writer.write(
                (
                    f"HTTP/1.1 {status}\r\n"
                    f"Content-Type: {ctype}\r\n"
                    f"Content-Length: {len(body)}\r\n"
                    "Connection: close\r\n\r\n"
                ).encode() + body
            )

        if self.ui_dir is None:
            respond("404 Not Found", b"no ui assets configured; connect a socket client\n")
            return
        rel = path.split("?", 1)[0].lstrip("/") or "index.html"
        full = (self.ui_dir / rel).resolve()
        try:
            full.relative_to(self.ui_dir.resolve())
        except ValueError:
            respond("403 Forbidden", b"")
            return
        if not full.is_file():
            respond("404 Not Found", b"not found\n")
            return
        ctype = mimetypes.guess_type(str(full))[0] or "application/octet-stream"
        respond("200 OK", full.read_bytes(), ctype)

    async def _serve_websocket(self, reader, writer, headers: dict) -> None:
        key = headers.get("sec-websocket-key", "")
        accept = base64.b64encode(
            hashlib.sha1((key + _WS_GUID).encode()).digest()
        ).decode()
        writer.write(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode()
        )
        await writer.drain()

        encode = lambda m: _ws_frame(
            (json.dumps(m, separators=(",", ":")) + "\n").encode()
        )
        client_id, client = self._register(writer, encode)
        drain = asyncio.ensure_future(client.drain())
        try:
            buffered = b""
            while True:
                frame = await _ws_read_frame(reader)
                if frame is None:
                    break
                opcode, payload, fin = frame
                if opcode == 0x8:  # close
                    writer.write(_ws_frame(b"", opcode=0x8))
                    break
                if opcode == 0x9:  # ping
                    writer.write(_ws_frame(payload, opcode=0xA))
                    continue
                if opcode in (0x0, 0x1, 0x2):
                    buffered += payload
                    if fin:
                        for line in buffered.split(b"\n"):
                            await self._on_client_line(client_id, client, line)
                        buffered = b""
        finally:
            self._unregister(client_id)
            drain.cancel()


def _ws_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    header = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header += bytes([n])
    elif n < 65536:
        header += bytes([126]) + n.to_bytes(2, "big")
    else:
        header += bytes([127]) + n.to_bytes(8, "big")
    return header + payload


async def _ws_read_frame(reader):
    try:
        first = await reader.readexactly(2)
    except (asyncio.IncompleteReadError, ConnectionError):
        return None
    fin = bool(first[0] & 0x80)
    opcode = first[0] & 0x0F
    masked = bool(first[1] & 0x80)
    length = first[1] & 0x7F
    if length == 126:
        length = int.from_bytes(await reader.readexactly(2), "big")
    elif length == 127:
        length = int.from_bytes(await reader.readexactly(8), "big")
    mask = await reader.readexactly(4) if masked else b""
    payload = await reader.readexactly(length) if length else b""
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, payload, fin


class DaemonThread:
    """Run a Daemon on a private event loop in a background thread."""

    def __init__(self, *args, **kwargs):
        import threading

        self.loop = asyncio.new_event_loop()
        self.daemon: Optional[Daemon] = None
        self._args = args
        self._kwargs = kwargs
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._startup: "queue.Queue" = None  # set in start()

    def _run(self) -> None:
        asyncio.set_event_loop(self.loop)
        try:
            self.daemon = Daemon(*self._args, **self._kwargs)
        except Exception as e:
            self._startup.put(e)
            return
        self._startup.put(None)
        try:
            self.loop.run_until_complete(self.daemon.run())
        finally:
            self.loop.close()

    def start(self, timeout: float = 10.0) -> "DaemonThread":
        import queue

        self._startup = queue.Queue()
        self._thread.start()
        error = self._startup.get(timeout=timeout)
        if error is not None:
            raise error
        deadline = time.monotonic() + timeout
        while self.daemon.bound_port is None:
            if time.monotonic() > deadline:
                raise TimeoutError("daemon did not bind")
            time.sleep(0.005)
        return self

    @property
    def port(self) -> int:
        return self.daemon.bound_port

    def stop(self) -> None:
        if self.daemon:
            self.loop.call_soon_threadsafe(self.daemon.stop)
        self._thread.join(timeout=5)
