"""Vision packages as newline-delimited JSON logs and UDP datagrams.

Each package is one JSON object::

    {"seq":0,"t":0.0,"robots":[{"id":1,"x":300.0,"y":1800.0}, ...]}

with exactly six robots carrying ids 1-6.  Packages written by the
simulator also carry an optional ``"draw"`` integer naming the simulator
draw they belong to; episodic training uses it to find play boundaries.
"""

from __future__ import annotations

import json
import logging
import math
import socket
from dataclasses import dataclass
from typing import IO, Iterator

from formcast.errors import DatagramSizeError, PackageParseError, ValidationError

log = logging.getLogger(__name__)

ROBOT_IDS = (1, 2, 3, 4, 5, 6)
DEFAULT_PORT = 10020
MAX_DATAGRAM = 1400

_KEYS = {"seq", "t", "robots"}
_OPTIONAL_KEYS = {"draw"}


@dataclass(frozen=True)
class RobotObservation:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class VisionPackage:
    seq: int
    t: float
    robots: tuple[RobotObservation, ...]
    draw: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "robots", tuple(self.robots))
        validate_package(self)

    def positions(self) -> dict[int, tuple[float, float]]:
        return {r.id: (r.x, r.y) for r in self.robots}

    def ordered_positions(self) -> list[tuple[float, float]]:
        return [(r.x, r.y) for r in sorted(self.robots, key=lambda r: r.id)]


def make_package(
    seq: int,
    t: float,
    positions: dict[int, tuple[float, float]],
    draw: int | None = None,
) -> VisionPackage:
    robots = tuple(RobotObservation(i, float(x), float(y)) for i, (x, y) in sorted(positions.items()))
    return VisionPackage(seq, float(t), robots, draw)


def validate_package(pkg: VisionPackage) -> None:
    if not _is_int(pkg.seq) or pkg.seq < 0:
        raise ValidationError(f"seq must be a non-negative integer, got {pkg.seq!r}")
    if not _is_number(pkg.t) or not math.isfinite(pkg.t) or pkg.t < 0:
        raise ValidationError(f"timestamp must be a non-negative number, got {pkg.t!r}")
    if pkg.draw is not None and (not _is_int(pkg.draw) or pkg.draw < 0):
        raise ValidationError(f"draw must be a non-negative integer, got {pkg.draw!r}")
    if len(pkg.robots) != 6:
        raise ValidationError(f"expected 6 robots, got {len(pkg.robots)}")
    seen = set()
    for r in pkg.robots:
        if not _is_int(r.id) or r.id not in ROBOT_IDS:
            raise ValidationError(f"robot id {r.id!r} not in 1..6")
        if r.id in seen:
            raise ValidationError(f"duplicate robot id {r.id}")
        seen.add(r.id)
        if not (_is_number(r.x) and _is_number(r.y)) or not (
            math.isfinite(r.x) and math.isfinite(r.y)
        ):
            raise ValidationError(f"robot {r.id} has non-finite coordinates")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def encode_package(pkg: VisionPackage) -> bytes:
    """Single-line encoding, no trailing newline."""
    validate_package(pkg)
    obj = {
        "seq": pkg.seq,
        "t": pkg.t,
        "robots": [{"id": r.id, "x": r.x, "y": r.y} for r in pkg.robots],
    }
    if pkg.draw is not None:
        obj["draw"] = pkg.draw
    return json.dumps(obj, separators=(",", ":"), allow_nan=False).encode("utf-8")


def decode_package(data: bytes | str, line: int | None = None) -> VisionPackage:
    try:
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        obj = json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PackageParseError(f"not a JSON object: {exc}", line) from None
    if not isinstance(obj, dict):
        raise PackageParseError("not a JSON object", line)
    keys = set(obj)
    if not _KEYS <= keys:
        raise PackageParseError(f"missing fields {sorted(_KEYS - keys)}", line)
    if keys - _KEYS - _OPTIONAL_KEYS:
        raise PackageParseError(f"unknown fields {sorted(keys - _KEYS - _OPTIONAL_KEYS)}", line)
    robots = obj["robots"]
    if not isinstance(robots, list):
        raise PackageParseError("robots must be a list", line)
    parsed = []
    for r in robots:
        if not isinstance(r, dict) or set(r) != {"id", "x", "y"}:
            raise PackageParseError(f"bad robot entry {r!r}", line)
        x, y = r["x"], r["y"]
        if not (_is_number(x) and _is_number(y)):
            raise PackageParseError(f"bad coordinates in {r!r}", line)
        parsed.append(RobotObservation(r["id"], float(x), float(y)))
    t = obj["t"]
    try:
        return VisionPackage(
            obj["seq"], float(t) if _is_number(t) else t, tuple(parsed), obj.get("draw")
        )
    except ValidationError as exc:
        raise PackageParseError(str(exc), line) from None


def write_package(pkg: VisionPackage, sink: IO[bytes]) -> None:
    sink.write(encode_package(pkg) + b"\n")


class PackageReader:
    """Reads packages one line at a time, tracking line numbers for errors."""

    def __init__(self, source: IO[bytes]):
        self.source = source
        self.line = 0

    def read(self) -> VisionPackage | None:
        """Next package, or None at end of stream.  Blank lines are skipped."""
        while True:
            raw = self.source.readline()
            if not raw:
                return None
            self.line += 1
            if raw.strip():
                return decode_package(raw.rstrip(b"\r\n"), self.line)

    def __iter__(self) -> Iterator[VisionPackage]:
        while (pkg := self.read()) is not None:
            yield pkg


def read_package(source: IO[bytes]) -> VisionPackage | None:
    raw = source.readline()
    if not raw:
        return None
    return decode_package(raw.rstrip(b"\r\n"))


def iter_packages(source: IO[bytes], skip_invalid: bool = False) -> Iterator[VisionPackage]:
    reader = PackageReader(source)
    while True:
        try:
            pkg = reader.read()
        except PackageParseError as exc:
            if not skip_invalid:
                raise
            log.warning("skipping malformed package: %s", exc)
            continue
        if pkg is None:
            return
        yield pkg


def parse_endpoint(endpoint: str | tuple[str, int]) -> tuple[str, int]:
    if isinstance(endpoint, tuple):
        return endpoint
    host, sep, port = endpoint.rpartition(":")
    if not sep:
        return endpoint, DEFAULT_PORT
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise ValidationError(f"bad port in endpoint {endpoint!r}") from None


def send_datagram(
    pkg: VisionPackage,
    endpoint: str | tuple[str, int],
    sock: socket.socket | None = None,
) -> None:
    payload = encode_package(pkg)
    if len(payload) > MAX_DATAGRAM:
        raise DatagramSizeError(f"encoded package is {len(payload)} bytes")
    addr = parse_endpoint(endpoint)
    if sock is None:
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
            s.sendto(payload, addr)
    else:
        sock.sendto(payload, addr)


class DatagramReceiver:
    """Receives packages from a bound UDP socket.

    Undecodable datagrams are logged and skipped.  Packages whose seq is not
    greater than the last accepted one are discarded.
    """

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.last_seq: int | None = None
        self.skipped = 0
        self.stale = 0

    @classmethod
    def bind(cls, endpoint: str | tuple[str, int], timeout: float | None = None):
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.bind(parse_endpoint(endpoint))
        sock.settimeout(timeout)
        return cls(sock)

    @property
    def address(self) -> tuple[str, int]:
        return self.sock.getsockname()

    def recv(self) -> VisionPackage | None:
        """Block for the next acceptable package; None once the socket is closed.

        ``socket.timeout`` propagates when the socket has a timeout set.
        """
        while True:
            try:
                data = self.sock.recv(65535)
            except socket.timeout:
                raise
            except OSError:
                return None
            try:
                pkg = decode_package(data)
            except PackageParseError as exc:
                self.skipped += 1
                log.warning("skipping undecodable datagram: %s", exc)
                continue
            if self.last_seq is not None and pkg.seq <= self.last_seq:
                self.stale += 1
                log.warning("discarding stale package seq=%d (last %d)", pkg.seq, self.last_seq)
                continue
            self.last_seq = pkg.seq
            return pkg

    def close(self) -> None:
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def recv_datagram(sock: socket.socket) -> VisionPackage | None:
    return DatagramReceiver(sock).recv()
