"""Datagram transports between the two agents.

A transport endpoint exposes ``send(data: bytes)`` and ``poll() -> list[bytes]``.
Links may drop, delay or reorder datagrams but never corrupt them.
"""

from __future__ import annotations

import collections
import socket
from typing import Protocol

import numpy as np


class Transport(Protocol):
    def send(self, data: bytes) -> None: ...

    def poll(self) -> list[bytes]: ...


class LossyLink:
    """One-way link with independent drops and a fixed delay in polls.

    A datagram sent before the receiver's ``k``-th poll is delivered by poll
    ``k + delay_steps`` unless dropped. One uniform draw is made per send,
    so the loss pattern depends only on the seed and the send count.
    """

    def __init__(self, loss_rate: float = 0.0, delay_steps: int = 0, seed: int = 0):
        if not 0.0 <= loss_rate < 1.0:
            raise ValueError(f"loss_rate must be in [0, 1), got {loss_rate!r}")
        if delay_steps < 0:
            raise ValueError("delay_steps must be >= 0")
        self.loss_rate = float(loss_rate)
        self.delay_steps = int(delay_steps)
        self._rng = np.random.default_rng(seed)
        self._queue: collections.deque = collections.deque()
        self._polls = 0
        self.sent = 0
        self.dropped = 0
        self.delivered = 0

    def send(self, data: bytes) -> None:
        self.sent += 1
        if self.loss_rate > 0.0 and self._rng.random() < self.loss_rate:
            self.dropped += 1
            return
        self._queue.append((self._polls + self.delay_steps, bytes(data)))

    def poll(self) -> list[bytes]:
        out = []
        while self._queue and self._queue[0][0] <= self._polls:
            out.append(self._queue.popleft()[1])
        self._polls += 1
        self.delivered += len(out)
        return out


def lossy_transport(loss_rate: float = 0.0, delay_steps: int = 0, seed: int = 0) -> LossyLink:
    return LossyLink(loss_rate, delay_steps, seed)


class Endpoint:
    """An agent's view of a duplex channel: sends on ``tx``, polls ``rx``."""

    def __init__(self, tx, rx):
        self.tx = tx
        self.rx = rx

    def send(self, data: bytes) -> None:
        self.tx.send(data)

    def poll(self) -> list[bytes]:
        return self.rx.poll()


def inproc_pair(loss_rate: float = 0.0, delay_steps: int = 0, seed: int = 0):
    """Two connected in-process endpoints ``(A, B)``; each direction has its own RNG stream."""
    ss = np.random.SeedSequence(seed)
    s_ab, s_ba = ss.spawn(2)
    ab = LossyLink(loss_rate, delay_steps, s_ab)
    ba = LossyLink(loss_rate, delay_steps, s_ba)
    return Endpoint(ab, ba), Endpoint(ba, ab)


class UdpEndpoint:
    """Non-blocking UDP endpoint bound to the loopback interface."""

    def __init__(self, port: int, peer_port: int, host: str = "127.0.0.1", timeout: float = 0.0):
        self.peer = (host, peer_port)
        self.timeout = timeout
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.sock.setblocking(False)
        self.sent = 0
        self.delivered = 0

    def send(self, data: bytes) -> None:
        self.sock.sendto(data, self.peer)
        self.sent += 1

    def poll(self) -> list[bytes]:
        out = []
        if self.timeout > 0.0:
            self.sock.settimeout(self.timeout)
            try:
                out.append(self.sock.recv(65535))
            except (socket.timeout, BlockingIOError):
                pass
            finally:
                self.sock.setblocking(False)
        while True:
            try:
                out.append(self.sock.recv(65535))
            except BlockingIOError:
                break
        self.delivered += len(out)
        return out

    def close(self) -> None:
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def udp_pair(port_a: int, port_b: int, timeout: float = 0.05):
    return UdpEndpoint(port_a, port_b, timeout=timeout), UdpEndpoint(port_b, port_a, timeout=timeout)
