"""Line framing over TCP plus the lamppost/feed client runners.

The live composition speaks the same envelopes as the in-process
simulation; only the byte transport differs. Clients send lock-step (one
message, then its ACK) and apply any commands that arrive interleaved, so
a single socket carries both directions without extra threads.
"""

from __future__ import annotations

import socket
from typing import Iterable, Optional

from lampgrid import protocol
from lampgrid.llu import LamppostUnit, SceneEvent
from lampgrid.protocol import Envelope, MessageType


class TransportError(ConnectionError):
    pass


class FrameAssembler:
    """Reassembles newline-terminated frames from arbitrary byte chunks."""

    def __init__(self):
        self._buffer = b""

    def feed(self, data: bytes) -> list[bytes]:
        self._buffer += data
        frames = []
        while True:
            newline = self._buffer.find(b"\n")
            if newline < 0:
                break
            frames.append(self._buffer[: newline + 1])
            self._buffer = self._buffer[newline + 1:]
        return frames

    @property
    def pending(self) -> int:
        return len(self._buffer)


class EnvelopeStream:
    """Blocking envelope reader/writer over one connected socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._assembler = FrameAssembler()
        self._inbox: list[Envelope] = []

    def send(self, envelope: Envelope) -> None:
        self._sock.sendall(protocol.encode(envelope))

    def receive(self, timeout: Optional[float] = None) -> Optional[Envelope]:
        """Next envelope, or None on clean EOF or timeout."""
        if self._inbox:
            return self._inbox.pop(0)
        self._sock.settimeout(timeout)
        while True:
            try:
                data = self._sock.recv(4096)
            except socket.timeout:
                return None
            if not data:
                if self._assembler.pending:
                    raise TransportError("connection closed mid-frame")
                return None
            frames = self._assembler.feed(data)
            if frames:
                envelopes = [protocol.decode(frame) for frame in frames]
                self._inbox.extend(envelopes[1:])
                return envelopes[0]

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def connect(host: str, port: int, timeout: float = 10.0) -> EnvelopeStream:
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    return EnvelopeStream(sock)


def _await_ack(stream: EnvelopeStream, seq: int,
               unit: Optional[LamppostUnit] = None) -> Envelope:
    """Read until the ACK for seq arrives; apply interleaved commands."""
    while True:
        envelope = stream.receive()
        if envelope is None:
            raise TransportError(f"connection closed while awaiting ack {seq}")
        if envelope.type is MessageType.ACK:
            if envelope.payload["ack_seq"] == seq:
                return envelope
            continue
        if unit is not None:
            reply = unit.handle_envelope(envelope)
            if reply is not None:
                stream.send(reply)


def run_llu_client(unit: LamppostUnit, stream: EnvelopeStream,
                   events: Iterable[SceneEvent],
                   final_heartbeat_ms: Optional[int] = None,
                   linger_s: float = 0.0) -> dict:
    """Replay scene events over a live connection; returns send counters.

    A heartbeat introduces the unit before any report; an optional final
    heartbeat pushes the service clock to the end of the timeline. With
    linger_s > 0 the client keeps applying inbound commands for that long
    (wall clock), so late propagation still reaches local signalling.
    """
    counters = {"reports_sent": 0, "acks": 0}
    hello = unit.heartbeat(0)
    stream.send(hello)
    _await_ack(stream, hello.seq, unit)
    counters["acks"] += 1
    for event in events:
        envelope = unit.handle_scene_event(event)
        if envelope is None:
            continue
        stream.send(envelope)
        _await_ack(stream, envelope.seq, unit)
        counters["reports_sent"] += 1
        counters["acks"] += 1
    if final_heartbeat_ms is not None:
        beat = unit.heartbeat(final_heartbeat_ms)
        stream.send(beat)
        _await_ack(stream, beat.seq, unit)
        counters["acks"] += 1
    while linger_s > 0:
        envelope = stream.receive(timeout=linger_s)
        if envelope is None:
            break
        reply = unit.handle_envelope(envelope)
        if reply is not None:
            stream.send(reply)
    return counters


def run_feed_client(stream: EnvelopeStream, entries, sender: str = "feed") -> int:
    """Send one FEED_UPDATE per script entry, lock-step with ACKs."""
    sequencer = protocol.Sequencer(sender)
    sent = 0
    for entry in entries:
        envelope = sequencer.next_envelope(
            MessageType.FEED_UPDATE, entry.t_ms,
            protocol.feed_update_payload(
                source=entry.source,
                severity=entry.severity,
                ttl_ms=entry.ttl_ms,
                issued_sim_time_ms=entry.t_ms,
                description=entry.desc,
            ),
        )
        stream.send(envelope)
        _await_ack(stream, envelope.seq)
        sent += 1
    return sent
