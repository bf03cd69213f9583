"""Operator HTTP API, event stream, and the lamppost/feed ingest listener.

Two listeners share one control unit: a JSON-over-HTTP API for the
operator dashboard (including a server-sent event stream), and a TCP
listener speaking the newline-delimited envelope protocol for lamppost
units and feeds. All state changes funnel through the control unit's
single lock, so the HTTP and stream sides never race.

CORS is deliberately permissive: the dashboard is served from a different
origin during development and the API carries no credentials.
"""

from __future__ import annotations

import json
import queue
import socketserver
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlparse

from lampgrid import protocol
from lampgrid.model import AlertState, ModelError
from lampgrid.profiles import ProfileError
from lampgrid.protocol import Envelope, MessageType, ProtocolError
from lampgrid.registry import RegistryError
from lampgrid.tcu import (
    BadAction,
    ControlUnit,
    IllegalAction,
    TargetUnreachable,
    UnknownAlert,
)

SSE_KEEPALIVE_S = 15.0
DEPLOY_ACK_TIMEOUT_S = 5.0


class TcuServer:
    """Runs the HTTP API and the envelope listener for one control unit."""

    def __init__(self, tcu: ControlUnit, host: str = "127.0.0.1",
                 http_port: int = 0, ingest_port: Optional[int] = 0):
        self.tcu = tcu
        self._event_queues: list[queue.Queue] = []
        self._event_lock = threading.Lock()
        self._unsubscribe = tcu.subscribe(self._broadcast)

        self._connections: dict[str, "_IngestHandler"] = {}
        self._connections_lock = threading.Lock()
        self._pending_acks: dict[tuple[str, int], queue.Queue] = {}

        self._http = ThreadingHTTPServer((host, http_port), _ApiHandler)
        self._http.daemon_threads = True
        self._http.tcu_server = self

        self._ingest: Optional[_IngestServer] = None
        if ingest_port is not None:
            self._ingest = _IngestServer((host, ingest_port), _IngestHandler)
            self._ingest.daemon_threads = True
            self._ingest.tcu_server = self

        self._threads: list[threading.Thread] = []
        tcu.set_deploy_channel(self._deploy_over_wire)

    @property
    def http_port(self) -> int:
        return self._http.server_address[1]

    @property
    def ingest_port(self) -> Optional[int]:
        return self._ingest.server_address[1] if self._ingest else None

    def start(self) -> None:
        for server in filter(None, (self._http, self._ingest)):
            thread = threading.Thread(
                target=server.serve_forever,
                kwargs={"poll_interval": 0.05},  # shutdown() latency bound
                daemon=True,
            )
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self._unsubscribe()
        for server in filter(None, (self._http, self._ingest)):
            server.shutdown()
            server.server_close()
        for thread in self._threads:
            thread.join(timeout=5)
        self.tcu.close()

    # -- event stream fan-out -------------------------------------------------

    def _broadcast(self, event_type: str, data: dict) -> None:
        event = {"type": event_type, **data}
        with self._event_lock:
            for q in self._event_queues:
                q.put(event)

    def open_event_queue(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._event_lock:
            self._event_queues.append(q)
        return q

    def close_event_queue(self, q: queue.Queue) -> None:
        with self._event_lock:
            if q in self._event_queues:
                self._event_queues.remove(q)

    # -- command push to live lamppost connections ------------------------------

    def register_connection(self, sender: str, handler: "_IngestHandler") -> None:
        with self._connections_lock:
            self._connections[sender] = handler

    def drop_connection(self, sender: str, handler: "_IngestHandler") -> None:
        with self._connections_lock:
            if self._connections.get(sender) is handler:
                del self._connections[sender]

    def push_outbound(self) -> None:
        """Route queued commands to whichever units are connected."""
        for envelope in self.tcu.pop_outbound():
            if envelope.type is not MessageType.COMMAND:
                continue
            target = envelope.payload["target"]
            with self._connections_lock:
                handler = self._connections.get(target)
            if handler is not None:
                handler.send_envelope(envelope)

    def resolve_ack(self, sender: str, ack_seq: int, envelope: Envelope) -> bool:
        key = (sender, ack_seq)
        slot = self._pending_acks.get(key)
        if slot is None:
            return False
        slot.put(envelope)
        return True

    def _deploy_over_wire(self, target: str,
                          envelope: Envelope) -> Optional[Envelope]:
        with self._connections_lock:
            handler = self._connections.get(target)
        if handler is None:
            raise TargetUnreachable(target)
        slot: queue.Queue = queue.Queue()
        key = (target, envelope.seq)
        self._pending_acks[key] = slot
        try:
            handler.send_envelope(envelope)
            return slot.get(timeout=DEPLOY_ACK_TIMEOUT_S)
        except queue.Empty:
            return None
        finally:
            del self._pending_acks[key]


class _IngestServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    tcu_server: TcuServer


class _IngestHandler(socketserver.StreamRequestHandler):
    """One connected lamppost or feed; frames in, ACKs and commands out."""

    def setup(self):
        super().setup()
        self.sender: Optional[str] = None
        self._send_lock = threading.Lock()

    def send_envelope(self, envelope: Envelope) -> None:
        try:
            with self._send_lock:
                self.wfile.write(protocol.encode(envelope))
                self.wfile.flush()
        except OSError:
            pass

    def handle(self):
        server: TcuServer = self.server.tcu_server
        tcu = server.tcu
        while True:
            frame = self.rfile.readline()
            if not frame:
                break
            if not frame.endswith(b"\n"):
                break
            try:
                envelope = protocol.decode(frame)
            except ProtocolError as exc:
                self.send_envelope(protocol.Envelope(
                    type=MessageType.ACK, seq=0, sender="tcu",
                    sent_sim_time_ms=tcu.now_ms,
                    payload=protocol.ack_payload(
                        MessageType.HEARTBEAT, 0, "error", str(exc)
                    ),
                ))
                continue
            if self.sender is None:
                self.sender = envelope.sender
                if envelope.sender in tcu.fleet:
                    server.register_connection(envelope.sender, self)
            if envelope.type is MessageType.ACK:
                server.resolve_ack(envelope.sender,
                                   envelope.payload["ack_seq"], envelope)
                continue
            reply = tcu.dispatch_envelope(envelope)
            if reply is not None:
                self.send_envelope(reply)
            server.push_outbound()

    def finish(self):
        if self.sender is not None:
            self.server.tcu_server.drop_connection(self.sender, self)
        super().finish()


class _ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "lampgrid"

    # -- plumbing ---------------------------------------------------------

    @property
    def tcu_server(self) -> TcuServer:
        return self.server.tcu_server

    @property
    def tcu(self) -> ControlUnit:
        return self.tcu_server.tcu

    def log_message(self, format, *args):
        pass

    def _cors_headers(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_json(self, status: int, doc: dict) -> None:
        body = json.dumps(doc, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self._cors_headers()
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> Optional[dict]:
        length = int(self.headers.get("Content-Length", 0))
        if length <= 0:
            return None
        raw = self.rfile.read(length)
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return None
        return doc if isinstance(doc, dict) else None

    # -- routes ------------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors_headers()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        route = url.path.rstrip("/") or "/"
        if route == "/api/v1/lampposts":
            self._send_json(200, {"lampposts": self.tcu.lamppost_view()})
        elif route == "/api/v1/alerts":
            self._get_alerts(url)
        elif route == "/api/v1/queue":
            queue_rows = [n.as_dict() for n in self.tcu.snapshot_queue()]
            self._send_json(200, {"queue": queue_rows})
        elif route == "/api/v1/risk":
            self._send_json(200, {
                "risk": self.tcu.risk_context().as_dict(),
                "preventive_threshold": self.tcu.config.preventive_threshold,
            })
        elif route == "/api/v1/warnings":
            warnings = [w.as_dict() for w in self.tcu.active_warnings()]
            self._send_json(200, {"warnings": warnings})
        elif route == "/api/v1/health":
            self._send_json(200, {"status": "up", "now_ms": self.tcu.now_ms})
        elif route == "/api/v1/events":
            self._stream_events()
        else:
            self._send_json(404, {"error": f"no route {route}"})

    def _get_alerts(self, url) -> None:
        params = parse_qs(url.query)
        state: Optional[AlertState] = None
        if "state" in params:
            try:
                state = AlertState(params["state"][0])
            except ValueError:
                self._send_json(
                    400, {"error": f"unknown state {params['state'][0]!r}"}
                )
                return
        alerts = [a.as_dict() for a in self.tcu.list_alerts(state)]
        self._send_json(200, {"alerts": alerts})

    def do_POST(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if (len(parts) == 5 and parts[:3] == ["api", "v1", "alerts"]
                and parts[4] == "action"):
            self._post_action(parts[3])
        elif parts == ["api", "v1", "profiles"]:
            self._post_profile()
        elif (len(parts) == 5 and parts[:3] == ["api", "v1", "profiles"]
                and parts[4] == "deploy"):
            self._post_deploy(parts[3])
        else:
            self._send_json(404, {"error": f"no route {url.path}"})

    def _post_action(self, alert_id: str) -> None:
        body = self._read_body()
        if body is None or "action" not in body or "operator" not in body:
            self._send_json(
                400, {"error": "body must carry 'action' and 'operator'"}
            )
            return
        radius = body.get("radius_m")
        if radius is not None and (
                isinstance(radius, bool) or not isinstance(radius, (int, float))):
            self._send_json(400, {"error": "'radius_m' must be a number"})
            return
        try:
            alert = self.tcu.operator_action(
                alert_id, body["action"], operator=str(body["operator"]),
                radius_m=float(radius) if radius is not None else None,
            )
        except UnknownAlert as exc:
            self._send_json(404, {"error": str(exc)})
            return
        except IllegalAction as exc:
            self._send_json(409, {
                "error": str(exc),
                "state": exc.current_state.value,
            })
            return
        except BadAction as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self.tcu_server.push_outbound()
        self._send_json(200, {"alert": alert.as_dict()})

    def _post_profile(self) -> None:
        body = self._read_body()
        if body is None:
            self._send_json(400, {"error": "body must be a profile object"})
            return
        try:
            version = self.tcu.register_profile(body)
        except (ProfileError, ModelError) as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(201, {"version": version})

    def _post_deploy(self, version_text: str) -> None:
        body = self._read_body() or {}
        targets = body.get("targets")
        if not isinstance(targets, list) or any(
                not isinstance(t, str) for t in targets):
            self._send_json(400, {"error": "'targets' must be a list of ids"})
            return
        try:
            version = int(version_text)
        except ValueError:
            self._send_json(400, {"error": f"bad version {version_text!r}"})
            return
        try:
            report = self.tcu.deploy_profile(version, targets)
        except RegistryError as exc:
            self._send_json(404, {"error": str(exc)})
            return
        self._send_json(200, {"deployment": report.as_dict()})

    # -- server-sent events ---------------------------------------------------

    def _stream_events(self) -> None:
        self.close_connection = True
        q = self.tcu_server.open_event_queue()
        try:
            self.send_response(200)
            self._cors_headers()
            self.send_header("Content-Type", "text/event-stream; charset=utf-8")
            self.send_header("Cache-Control", "no-store")
            self.send_header("Connection", "keep-alive")
            self.end_headers()
            self.wfile.write(b": stream open\n\n")
            self.wfile.flush()
            while True:
                try:
                    event = q.get(timeout=SSE_KEEPALIVE_S)
                except queue.Empty:
                    self.wfile.write(b": keep-alive\n\n")
                    self.wfile.flush()
                    continue
                data = json.dumps(event, ensure_ascii=False)
                self.wfile.write(f"data: {data}\n\n".encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            self.tcu_server.close_event_queue(q)
