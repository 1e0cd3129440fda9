"""Binary wire format of the per-agent estimate message.

Layout, little-endian, no padding::

    offset  type     field
    0       uint8    protocol_version (currently 1)
    1       uint8    agent_id, ASCII 'A' or 'B'
    2       uint64   seq
    10      float64  timestamp [s]
    18      float64  v_d [m/s]
    26      float64  w_theta [rad/s]
    34      uint32   n_points
    38      n_points records of 52 bytes:
              uint32   point_id
              float64  x, y            normalized feature
              float64  x_rate, y_rate  observer feature rate [1/s]
              float64  chi             inverse depth [1/m]
              float64  chi_rate        [1/(m s)]

Records are sorted by ``point_id``; every float must be finite.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from .errors import MalformedMessage
from .geometry import UnicycleInput

PROTOCOL_VERSION = 1

_HEADER = struct.Struct("<BBQdddI")
_POINT = struct.Struct("<Idddddd")


@dataclass(frozen=True)
class PointEstimate:
    point_id: int
    s: tuple
    s_rate: tuple
    chi: float
    chi_rate: float


@dataclass(frozen=True)
class EstimateMessage:
    agent_id: str
    seq: int
    timestamp: float
    u: UnicycleInput
    points: tuple = ()
    protocol_version: int = PROTOCOL_VERSION

    def point(self, point_id: int) -> PointEstimate | None:
        for p in self.points:
            if p.point_id == point_id:
                return p
        return None


def serialize(msg: EstimateMessage) -> bytes:
    if msg.agent_id not in ("A", "B"):
        raise MalformedMessage(f"agent_id must be 'A' or 'B', got {msg.agent_id!r}")
    ids = [p.point_id for p in msg.points]
    if ids != sorted(ids) or len(set(ids)) != len(ids):
        raise MalformedMessage(f"points must be sorted with unique ids, got {ids}")
    floats = [msg.timestamp, *msg.u]
    for p in msg.points:
        floats.extend((*p.s, *p.s_rate, p.chi, p.chi_rate))
    if not all(math.isfinite(f) for f in floats):
        raise MalformedMessage("message contains a non-finite value")
    parts = [_HEADER.pack(msg.protocol_version, ord(msg.agent_id), msg.seq, msg.timestamp,
                          msg.u[0], msg.u[1], len(msg.points))]
    for p in msg.points:
        parts.append(_POINT.pack(p.point_id, p.s[0], p.s[1], p.s_rate[0], p.s_rate[1],
                                 p.chi, p.chi_rate))
    return b"".join(parts)


def deserialize(data: bytes) -> EstimateMessage:
    if len(data) < _HEADER.size:
        raise MalformedMessage(f"truncated header: {len(data)} bytes")
    version, agent, seq, ts, v, w, n = _HEADER.unpack_from(data, 0)
    if version != PROTOCOL_VERSION:
        raise MalformedMessage(f"unsupported protocol version {version}")
    if agent not in (ord("A"), ord("B")):
        raise MalformedMessage(f"bad agent id byte {agent:#x}")
    expected = _HEADER.size + n * _POINT.size
    if len(data) != expected:
        raise MalformedMessage(f"length {len(data)} does not match {n} points ({expected} bytes)")
    points = []
    for i in range(n):
        pid, x, y, xr, yr, chi, chir = _POINT.unpack_from(data, _HEADER.size + i * _POINT.size)
        points.append(PointEstimate(pid, (x, y), (xr, yr), chi, chir))
    msg = EstimateMessage(chr(agent), seq, ts, UnicycleInput(v, w), tuple(points), version)
    floats = [ts, v, w] + [f for p in points for f in (*p.s, *p.s_rate, p.chi, p.chi_rate)]
    if not all(math.isfinite(f) for f in floats):
        raise MalformedMessage("message contains a non-finite value")
    ids = [p.point_id for p in points]
    if ids != sorted(ids) or len(set(ids)) != len(ids):
        raise MalformedMessage(f"point ids not sorted/unique: {ids}")
    return msg
