"""Broadcast message bus.

Every publisher's datagrams reach every subscriber; nobody is configured
with a list of peers. Two transports share the same receiver API:

* :class:`SimBus`, an in-process network with seeded latency, jitter and
  loss on a virtual clock, used by tests and offline pipelines;
* :class:`UdpBus`, real UDP sockets sending to a broadcast address.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import os
import random
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass

from .osc import MAX_DATAGRAM

DEFAULT_BROADCAST = ("255.255.255.255", 9000)
BROADCAST_ENV = "STAGEWIRE_BROADCAST"


class BusError(Exception):
    pass


class Oversize(BusError, ValueError):
    pass


class SocketFailure(BusError, OSError):
    pass


class BindFailure(SocketFailure):
    pass


class DuplicateName(BusError, ValueError):
    pass


class Closed(BusError):
    pass


@dataclass(frozen=True)
class Endpoint:
    transport: str  # "udp" | "sim"
    host: str = ""
    port: int = 0
    name: str = ""

    def __post_init__(self):
        if self.transport == "udp":
            if not 1 <= self.port <= 65535:
                raise ValueError(f"port {self.port} outside 1-65535")
        elif self.transport == "sim":
            if not self.name:
                raise ValueError("sim endpoints need a name")
        else:
            raise ValueError(f"unknown transport {self.transport!r}")

    @classmethod
    def udp(cls, host: str, port: int) -> Endpoint:
        return cls("udp", host, int(port))

    @classmethod
    def sim(cls, name: str) -> Endpoint:
        return cls("sim", name=name)

    @classmethod
    def parse(cls, text: str) -> Endpoint:
        """``HOST:PORT`` or ``sim:NAME``."""
        if text.startswith("sim:"):
            return cls.sim(text[4:])
        host, sep, port = text.rpartition(":")
        if not sep or not port.isdigit():
            raise ValueError(f"expected HOST:PORT, got {text!r}")
        return cls.udp(host or "127.0.0.1", int(port))

    @property
    def addr(self) -> tuple[str, int]:
        return (self.host, self.port)

    def __str__(self):
        return f"sim:{self.name}" if self.transport == "sim" else f"{self.host}:{self.port}"


def default_broadcast() -> Endpoint:
    """Broadcast target, overridable through ``STAGEWIRE_BROADCAST``."""
    env = os.environ.get(BROADCAST_ENV)
    if env:
        return Endpoint.parse(env)
    return Endpoint.udp(*DEFAULT_BROADCAST)


def _check_size(packet: bytes) -> bytes:
    packet = bytes(packet)
    if len(packet) > MAX_DATAGRAM:
        raise Oversize(f"{len(packet)}-byte packet exceeds {MAX_DATAGRAM}")
    return packet


class Receiver:
    """Single-consumer queue of ``(packet, sender)`` pairs."""

    def __init__(self, name: str):
        self.name = name
        self._queue: deque[tuple[bytes, str]] = deque()
        self._cond = threading.Condition()
        self._closed = False

    def _put(self, packet: bytes, sender: str) -> None:
        with self._cond:
            if not self._closed:
                self._queue.append((packet, sender))
                self._cond.notify()

    def recv(self, timeout_ms: float = 0) -> tuple[bytes, str] | None:
        deadline = time.monotonic() + max(timeout_ms, 0) / 1000.0
        with self._cond:
            while not self._queue:
                if self._closed:
                    raise Closed(f"receiver {self.name!r} is closed")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._cond.wait(remaining)
            return self._queue.popleft()

    def drain(self) -> list[tuple[bytes, str]]:
        out = []
        while (item := self.recv(0)) is not None:
            out.append(item)
        return out

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._queue.clear()
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed


# -- simulated network ---------------------------------------------------------


@dataclass(frozen=True)
class SimNetConfig:
    latency_ms: float = 0.0
    jitter_ms: float = 0.0
    loss_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ValueError("loss_rate must be in [0, 1]")
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency and jitter must be >= 0")


@dataclass(frozen=True)
class PublisherConfig:
    """What a device knows about the network: its name and where it sends."""

    name: str
    target: Endpoint


class Publisher:
    def __init__(self, bus, name: str, target: Endpoint):
        self.bus = bus
        self.config = PublisherConfig(name, target)

    @property
    def name(self) -> str:
        return self.config.name

    def publish(self, packet: bytes) -> None:
        self.bus.publish(packet, sender=self.name)


class _SimReceiver(Receiver):
    def __init__(self, name: str):
        super().__init__(name)
        self.log: list[tuple[float, str, bytes]] = []


def _link_rng(seed: int, publisher: str, subscriber: str) -> random.Random:
    digest = hashlib.blake2b(f"{seed}\x00{publisher}\x00{subscriber}".encode(), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


@dataclass
class _Link:
    rng: random.Random
    last_due: float = float("-inf")


class SimBus:
    """Deterministic in-process broadcast network.

    Loss and jitter are drawn from a per-link generator keyed by
    ``(seed, publisher, subscriber)``, so adding or removing one subscriber
    never changes what another one receives. Delivery is FIFO per
    publisher on each link. Time is virtual: packets with latency become
    receivable once :meth:`advance` moves the clock past their due time.
    """

    address = Endpoint.sim("broadcast")

    def __init__(self, config: SimNetConfig | None = None):
        self.config = config or SimNetConfig()
        self.now_ms = 0.0
        self._lock = threading.RLock()
        self._receivers: dict[str, _SimReceiver] = {}
        self._links: dict[tuple[str, str], _Link] = {}
        self._pending: list = []
        self._order = itertools.count()
        self._closed = False

    def publisher(self, name: str) -> Publisher:
        return Publisher(self, name, self.address)

    def subscribe(self, name: str) -> Receiver:
        with self._lock:
            self._check_open()
            if name in self._receivers:
                raise DuplicateName(f"subscriber {name!r} already exists")
            rx = _SimReceiver(name)
            self._receivers[name] = rx
            return rx

    def unsubscribe(self, name: str) -> None:
        with self._lock:
            rx = self._receivers.pop(name, None)
            if rx is not None:
                rx.close()
            for key in [k for k in self._links if k[1] == name]:
                del self._links[key]

    def publish(self, packet: bytes, sender: str = "anonymous") -> None:
        packet = _check_size(packet)
        cfg = self.config
        with self._lock:
            self._check_open()
            for name, rx in self._receivers.items():
                link = self._links.get((sender, name))
                if link is None:
                    link = self._links[(sender, name)] = _Link(_link_rng(cfg.seed, sender, name))
                # two draws per packet, whatever the config, to keep streams aligned
                lost = link.rng.random() < cfg.loss_rate
                jitter = (link.rng.random() * 2.0 - 1.0) * cfg.jitter_ms
                if lost:
                    continue
                due = max(self.now_ms + max(cfg.latency_ms + jitter, 0.0), link.last_due)
                link.last_due = due
                if due <= self.now_ms:
                    self._deliver(rx, packet, sender)
                else:
                    heapq.heappush(self._pending, (due, next(self._order), name, packet, sender))

    def advance(self, ms: float) -> None:
        self.advance_to(self.now_ms + ms)

    def advance_to(self, t_ms: float) -> None:
        with self._lock:
            if t_ms < self.now_ms:
                raise ValueError("the simulated clock cannot go backwards")
            while self._pending and self._pending[0][0] <= t_ms:
                due, _, name, packet, sender = heapq.heappop(self._pending)
                self.now_ms = due
                rx = self._receivers.get(name)
                if rx is not None:
                    self._deliver(rx, packet, sender)
            self.now_ms = t_ms

    def flush(self) -> None:
        """Advance until nothing is in flight."""
        with self._lock:
            if self._pending:
                self.advance_to(max(p[0] for p in self._pending))

    def _deliver(self, rx: _SimReceiver, packet: bytes, sender: str) -> None:
        rx.log.append((self.now_ms, sender, packet))
        rx._put(packet, sender)

    def delivery_log(self, name: str) -> bytes:
        """Byte-stable record of everything delivered to ``name``."""
        rx = self._receivers[name]
        return "".join(f"{t:.3f}\t{s}\t{p.hex()}\n" for t, s, p in rx.log).encode()

    def shutdown(self) -> None:
        with self._lock:
            self._closed = True
            for rx in self._receivers.values():
                rx.close()

    def _check_open(self):
        if self._closed:
            raise Closed("bus is shut down")


# -- UDP -----------------------------------------------------------------------


def open_udp_listener(port: int, host: str = "", shared: bool = True) -> socket.socket:
    """Bound UDP socket that accepts broadcast datagrams on ``port``.

    ``shared`` lets several processes on one host listen to the same
    broadcast port; an exclusive bind fails if anyone else holds it.
    """
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        if shared:
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            if hasattr(socket, "SO_REUSEPORT"):
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEPORT, 1)
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise BindFailure(f"cannot bind UDP port {port}: {exc}") from exc
    return sock


class _UdpReceiver(Receiver):
    def __init__(self, name: str, sock: socket.socket):
        super().__init__(name)
        self.sock = sock
        self._thread = threading.Thread(target=self._pump, name=f"udp-rx-{name}", daemon=True)
        self._thread.start()

    def _pump(self):
        # a close() from another thread does not interrupt a blocking recvfrom
        self.sock.settimeout(0.1)
        while not self._closed:
            try:
                data, addr = self.sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            self._put(data, f"{addr[0]}:{addr[1]}")

    def close(self):
        super().close()
        try:
            self.sock.close()
        except OSError:
            pass


class UdpBus:
    """Broadcast over UDP. One datagram per publish, raw OSC bytes only."""

    def __init__(self, target: Endpoint | None = None, listen_port: int | None = None):
        self.target = target or default_broadcast()
        self.listen_port = listen_port if listen_port is not None else self.target.port
        self._send = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._send.setsockopt(socket.SOL_SOCKET, socket.SO_BROADCAST, 1)
        self._receivers: dict[str, _UdpReceiver] = {}
        self._lock = threading.Lock()
        self._closed = False

    def publisher(self, name: str) -> Publisher:
        return Publisher(self, name, self.target)

    def publish(self, packet: bytes, sender: str = "anonymous") -> None:
        packet = _check_size(packet)
        if self._closed:
            raise Closed("bus is shut down")
        try:
            self._send.sendto(packet, self.target.addr)
        except OSError as exc:
            raise SocketFailure(f"send to {self.target} failed: {exc}") from exc

    def subscribe(self, name: str) -> Receiver:
        with self._lock:
            if self._closed:
                raise Closed("bus is shut down")
            if name in self._receivers:
                raise DuplicateName(f"subscriber {name!r} already exists")
            rx = _UdpReceiver(name, open_udp_listener(self.listen_port))
            self._receivers[name] = rx
            return rx

    def unsubscribe(self, name: str) -> None:
        with self._lock:
            rx = self._receivers.pop(name, None)
        if rx is not None:
            rx.close()

    def shutdown(self) -> None:
        with self._lock:
            self._closed = True
            receivers = list(self._receivers.values())
        for rx in receivers:
            rx.close()
        self._send.close()


def publish(bus, packet: bytes, sender: str = "anonymous") -> None:
    bus.publish(packet, sender)


def subscribe(bus, name: str) -> Receiver:
    return bus.subscribe(name)


def recv(handle: Receiver, timeout_ms: float) -> tuple[bytes, str] | None:
    return handle.recv(timeout_ms)
