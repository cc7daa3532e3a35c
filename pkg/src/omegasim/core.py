"""Value types shared by every layer: identities, virtual time, wire messages.

Process ids are plain integers in 1..n, smaller id wins leadership.  Virtual
time is an integer count of global reference-clock ticks; durations add to
times without conversion.  The two message shapes carry a candidate leader
plus a hop budget, and (for the unknown-membership variant) a set of labeled
names still being disseminated.  The byte encodings here are the concrete
witness for the message-size bounds asserted in the test suite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

# Type aliases, for signatures. Ids are 1-based; time and durations are ticks.
ProcessId = int
SimTime = int
Duration = int


class Label(enum.IntEnum):
    """Dissemination labels on pending-set entries."""

    NEW = 0
    ACK = 1


@dataclass(frozen=True)
class AliveKnown:
    """Heartbeat of the fixed-membership variant: a leader id and hop budget."""

    leader: int
    hopbound: int


@dataclass(frozen=True)
class AliveUnknown:
    """Heartbeat of the open-membership variant.

    leader/hopbound are both set or both None (a process that cannot yet
    relay a leader still ships its pending set).  pending holds (Label, id)
    pairs.  seq is an optional staleness guard, a per-channel monotone
    counter; None when the guard is disabled.
    """

    leader: int | None
    hopbound: int | None
    pending: frozenset = field(default_factory=frozenset)
    seq: int | None = None

    def __post_init__(self):
        if (self.leader is None) != (self.hopbound is None):
            raise ValueError("leader and hopbound must be both set or both absent")
        if not isinstance(self.pending, frozenset):
            object.__setattr__(self, "pending", frozenset(self.pending))


@dataclass(frozen=True)
class AddParams:
    """Channel guarantee: of any K consecutive sends after stabilization,
    at least one is delivered within D ticks."""

    K: int
    D: int
    stabilization: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.D < 0:
            raise ValueError(f"D must be >= 0, got {self.D}")
        if self.stabilization < 0:
            raise ValueError(f"stabilization must be >= 0, got {self.stabilization}")


def compute_delta(K: int, D: Duration, T: Duration) -> Duration:
    """Max gap between consecutive receptions on a stabilized channel whose
    sender transmits every T ticks: (K-1)*T + D."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if D < 0:
        raise ValueError(f"D must be >= 0, got {D}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    return (K - 1) * T + D


def id_width(n: int) -> int:
    """Bits needed to hold any id in 1..n."""
    return n.bit_length()


def known_payload_bytes(n: int) -> int:
    """Fixed payload size for n processes: two id-width fields, whole bytes."""
    return (2 * id_width(n) + 7) // 8


def encode_known(msg: AliveKnown, n: int) -> bytes:
    """Pack leader and hopbound into 2*ceil(log2(n+1)) bits."""
    w = id_width(n)
    if not 1 <= msg.leader <= n:
        raise ValueError(f"leader {msg.leader} outside 1..{n}")
    if not 1 <= msg.hopbound <= n - 1:
        raise ValueError(f"hopbound {msg.hopbound} outside 1..{n - 1}")
    packed = (msg.leader << w) | msg.hopbound
    return packed.to_bytes(known_payload_bytes(n), "big")


def decode_known(data: bytes, n: int) -> AliveKnown:
    if len(data) != known_payload_bytes(n):
        raise ValueError(f"expected {known_payload_bytes(n)} bytes, got {len(data)}")
    w = id_width(n)
    packed = int.from_bytes(data, "big")
    leader = packed >> w
    hopbound = packed & ((1 << w) - 1)
    if not 1 <= leader <= n or not 1 <= hopbound <= n - 1:
        raise ValueError("decoded fields out of range")
    return AliveKnown(leader, hopbound)


def _varint(value: int) -> bytes:
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise ValueError("truncated varint")
        b = data[pos]
        pos += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise ValueError("varint too long")


# Flag byte layout for the open-membership message: bit0 = leader pair
# present, bit1 = pending entries follow, bit2 = staleness counter follows,
# bits 3..7 = bit width of the leader/hopbound fields.
_F_LEADER = 0x01
_F_PENDING = 0x02
_F_SEQ = 0x04


def encode_unknown(msg: AliveUnknown) -> bytes:
    flags = 0
    w = 0
    body = bytearray()
    if msg.leader is not None:
        if msg.leader < 1:
            raise ValueError(f"leader {msg.leader} must be >= 1")
        if msg.hopbound < 1:
            raise ValueError(f"hopbound {msg.hopbound} must be >= 1 on the wire")
        w = max(msg.leader.bit_length(), msg.hopbound.bit_length())
        if w > 31:
            raise ValueError("field width exceeds 31 bits")
        flags |= _F_LEADER
        packed = (msg.leader << w) | msg.hopbound
        body += packed.to_bytes((2 * w + 7) // 8, "big")
    if msg.pending:
        flags |= _F_PENDING
        body += _varint(len(msg.pending))
        for label, k in sorted(msg.pending):
            if k < 1:
                raise ValueError(f"pending id {k} must be >= 1")
            body += _varint((k << 1) | int(label))
    if msg.seq is not None:
        if msg.seq < 0:
            raise ValueError("seq must be >= 0")
        flags |= _F_SEQ
        body += _varint(msg.seq)
    return bytes([flags | (w << 3)]) + bytes(body)


def decode_unknown(data: bytes) -> AliveUnknown:
    if not data:
        raise ValueError("empty payload")
    flags = data[0]
    w = flags >> 3
    pos = 1
    leader = hopbound = None
    if flags & _F_LEADER:
        if w == 0:
            raise ValueError("leader present but zero field width")
        nbytes = (2 * w + 7) // 8
        if pos + nbytes > len(data):
            raise ValueError("truncated leader fields")
        packed = int.from_bytes(data[pos : pos + nbytes], "big")
        pos += nbytes
        leader = packed >> w
        hopbound = packed & ((1 << w) - 1)
        if leader < 1 or hopbound < 1:
            raise ValueError("decoded leader fields out of range")
    pending = set()
    if flags & _F_PENDING:
        count, pos = _read_varint(data, pos)
        if count == 0:
            raise ValueError("pending flag set but count is zero")
        for _ in range(count):
            raw, pos = _read_varint(data, pos)
            pending.add((Label(raw & 1), raw >> 1))
    seq = None
    if flags & _F_SEQ:
        seq, pos = _read_varint(data, pos)
    if pos != len(data):
        raise ValueError(f"{len(data) - pos} trailing bytes")
    return AliveUnknown(leader, hopbound, frozenset(pending), seq)
