"""Deterministic discrete-event engine and lossy-channel models.

The engine owns a single priority queue of (time, seq, tag, ...) tuples.
Ties at the same instant resolve by seq, i.e. insertion order, and crash
events are seeded first so they claim the smallest seqs at their instant.
Process ticks are not queue events: every delay and timeout is at least
one time unit, so nothing scheduled while handling instant t can land at
t, and the engine can simply drain the queue at each instant and then run
the tick phase for processes whose local clock hits a multiple of T.

Channels drop or delay messages; they never duplicate or corrupt them.
A channel in "strict" mode enforces the bounded-loss guarantee: it never
drops K consecutive messages, and everything it delivers arrives within
D time units. "iid" mode is plain Bernoulli loss with no guarantee, and
"script" mode replays a fixed outcome list for exhaustive small tests.
Before a channel's stabilization time, messages are dropped outright by
default, or (pre_drop < 1) delivered with delays of up to 10*D.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from heapq import heappop, heappush
from math import log

from .core import AddParams, encode_unknown

# event tags; dispatch only, ordering is (time, seq)
_CRASH = 0
_DELIVER = 1
_TIMER = 2
_RAW = 3

_NEVER_FORCE = 1 << 62  # sentinel "misses" threshold for modes without forcing
_INF_SKIP = 1 << 62


class Channel:
    """One directed edge with its own loss state and RNG stream.

    Loss is sampled as runs: when a fresh send draws "drop", the length
    of the whole run of consecutive drops is sampled geometrically and
    stored in `skip`, and subsequent sends consume it without touching
    the RNG. By memorylessness this is distributed exactly like a
    per-send Bernoulli(drop) draw. `misses` counts consecutive drops
    since the last delivery; in strict mode a send that would be the
    K-th consecutive miss is delivered instead, whatever was sampled.
    """

    __slots__ = (
        "src", "dst", "cid", "K", "D", "stab", "drop", "mode",
        "pre_drop", "rng", "script", "spos", "misses", "skip", "km1",
    )

    def __init__(self, src, dst, params: AddParams, drop, *, mode="iid",
                 pre_drop=1.0, rng=None, cid=None, script=None):
        if mode not in ("iid", "strict", "script"):
            raise ValueError(f"unknown channel mode {mode!r}")
        if not 0.0 <= drop <= 1.0:
            raise ValueError(f"drop rate {drop} outside [0, 1]")
        if mode == "script" and script is None:
            raise ValueError("script mode needs a script")
        if mode != "script" and rng is None:
            raise ValueError(f"{mode} mode needs an rng")
        self.src = src
        self.dst = dst
        self.cid = cid
        self.K = params.K
        self.D = params.D
        self.stab = params.stabilization
        self.drop = drop
        self.mode = mode
        self.pre_drop = pre_drop
        self.rng = rng
        self.script = list(script) if script is not None else None
        self.spos = 0
        self.misses = 0
        self.skip = -1  # -1: no drop run sampled
        self.km1 = params.K - 1 if mode == "strict" else _NEVER_FORCE


def channel_on_send(ch: Channel, t: int):
    """Outcome of sending on `ch` at time t: delivery time, or None."""
    if ch.mode == "script":
        i = ch.spos
        s = ch.script
        if i < len(s):
            ch.spos = i + 1
            d = s[i]
            return None if d is None else t + d
        return t + 1  # exhausted scripts turn reliable
    if t < ch.stab:
        # anarchy period: loss counters stay frozen
        if ch.pre_drop >= 1.0:
            return None
        r = ch.rng
        if r.random() < ch.pre_drop:
            return None
        return t + 1 + int(r.random() * 10 * ch.D)
    if ch.misses == ch.km1:
        ch.misses = 0
        return t + 1 + int(ch.rng.random() * ch.D)
    skip = ch.skip
    if skip < 0:
        p = ch.drop
        if p <= 0.0:
            skip = 0
        elif p >= 1.0:
            skip = _INF_SKIP
        else:
            # run length: P(skip >= k) = p^k
            skip = int(log(1.0 - ch.rng.random()) / log(p))
        ch.skip = skip
    if skip == 0:
        ch.skip = -1
        ch.misses = 0
        return t + 1 + int(ch.rng.random() * ch.D)
    ch.skip = skip - 1
    ch.misses += 1
    return None


@dataclass(frozen=True, slots=True)
class Event:
    """One recorded simulation event (tick, deliver, timer, crash)."""

    time: int
    seq: int
    kind: str
    payload: tuple


def export_json_lines(events) -> str:
    """Serialize recorded events, one JSON object per line, stable order."""
    out = []
    for e in events:
        out.append(json.dumps(
            {"t": e.time, "seq": e.seq, "kind": e.kind, "payload": e.payload},
            sort_keys=True, separators=(",", ":")))
    return "\n".join(out) + ("\n" if out else "")


class Engine:
    """Runs a set of processes over a set of channels up to a horizon.

    `states` maps pid to a process object; `out_channels` maps pid to its
    outgoing Channel list. A process object exposes `leader`, `hb_leader`
    (known variant) or `tick_message(cid)` (unknown variant), plus
    `on_alive` and `timer_fired`; the engine wires its `arm` and `note`
    callbacks at construction. Local clocks differ from global time by
    the constant per-process `offsets`; a process ticks when its local
    clock is a positive multiple of T.
    """

    def __init__(self, states, out_channels, *, T=1, offsets=None,
                 crashes=None, algorithm="known", record=False):
        if T < 1:
            raise ValueError("tick period must be at least 1")
        if algorithm not in ("known", "unknown"):
            raise ValueError(f"unknown algorithm {algorithm!r}")
        self.T = T
        self.mode = algorithm
        self.states = dict(states)
        self.now = 0
        self._seq = 0
        self._queue = []
        self.live = {pid: True for pid in self.states}
        # aggregates, kept cheap enough to leave on for every run
        self.total_sends = 0
        self.total_deliveries = 0
        self.last_send = {}           # pid -> last tick it sent anything
        self.last_send_for = {}       # advertised leader id -> last send time
        self.last_delivery_from = {}  # src pid -> last delivery of its messages
        self.transitions = []         # (time, pid, new_leader)
        self.max_bits = 0             # unknown mode: widest message seen
        self.max_bits_empty = 0       # unknown mode: widest empty-pending message
        self.last_nonempty = {}       # cid -> last send with nonempty pending
        self.events = [] if record else None
        self.sends = [] if record else None
        offsets = offsets or {}
        # phase groups: processes ticking when global t % T == r
        self._groups = [[] for _ in range(T)]
        for pid in sorted(self.states):
            st = self.states[pid]
            outs = tuple(out_channels.get(pid, ()))
            r = (-offsets.get(pid, 0)) % T
            self._groups[r].append((pid, st, outs))
            st.arm = self._make_arm(pid)
            st.note = self._make_note(pid)
        self.crashes = dict(crashes or {})
        for pid, ct in sorted(self.crashes.items(), key=lambda kv: (kv[1], kv[0])):
            if pid not in self.states:
                raise ValueError(f"crash for unknown process {pid}")
            if ct < 1:
                raise ValueError(f"crash time {ct} before the run starts")
            self._seq += 1
            heappush(self._queue, (ct, self._seq, _CRASH, pid))

    def _make_arm(self, pid):
        def arm(deadline, key, gen):
            self._seq += 1
            heappush(self._queue, (deadline, self._seq, _TIMER, pid, key, gen))
        return arm

    def _make_note(self, pid):
        transitions = self.transitions
        def note(t, new_leader):
            transitions.append((t, pid, new_leader))
        return note

    def schedule(self, time, kind, *payload):
        """Queue an inert marker event; used by tests and debugging."""
        if time <= self.now:
            raise ValueError(f"cannot schedule at {time}, now is {self.now}")
        self._seq += 1
        heappush(self._queue, (time, self._seq, _RAW, kind, payload))
        return self._seq

    def drain(self):
        """Pop every queued event in dispatch order without running it."""
        names = {_CRASH: "crash", _DELIVER: "deliver", _TIMER: "timer"}
        out = []
        while self._queue:
            ev = heappop(self._queue)
            if ev[2] == _RAW:
                out.append((ev[0], ev[1], ev[3], ev[4]))
            else:
                out.append((ev[0], ev[1], names[ev[2]], tuple(ev[3:])))
        return out

    def run(self, horizon):
        if horizon < self.now:
            raise ValueError("horizon lies in the past")
        q = self._queue
        live = self.live
        states = self.states
        groups = self._groups
        T = self.T
        known = self.mode == "known"
        record = self.events is not None
        events = self.events
        sends = self.sends
        last_send = self.last_send
        last_send_for = self.last_send_for
        last_delivery_from = self.last_delivery_from
        nsends = 0
        ndeliv = 0
        t = self.now
        while t < horizon:
            t += 1
            while q and q[0][0] == t:
                ev = heappop(q)
                tag = ev[2]
                if tag == _DELIVER:
                    dst = ev[3]
                    if not live[dst]:
                        continue
                    ndeliv += 1
                    src = ev[4]
                    last_delivery_from[src] = t
                    if known:
                        if record:
                            events.append(Event(t, ev[1], "deliver",
                                                (src, dst, ev[5], ev[6], ev[7])))
                        states[dst].on_alive(ev[5], ev[6], t)
                    else:
                        msg = ev[6]
                        if record:
                            events.append(Event(t, ev[1], "deliver",
                                                (src, dst, msg.leader, msg.hopbound,
                                                 ev[7], ev[5],
                                                 tuple(sorted(msg.pending)), msg.seq)))
                        states[dst].on_alive(ev[5], msg, t)
                elif tag == _TIMER:
                    pid = ev[3]
                    if live[pid] and states[pid].timer_fired(ev[4], ev[5], t):
                        if record:
                            key = ev[4]
                            key = key if isinstance(key, tuple) else (key,)
                            events.append(Event(t, ev[1], "timer", (pid,) + key))
                elif tag == _CRASH:
                    live[ev[3]] = False
                    if record:
                        events.append(Event(t, ev[1], "crash", (ev[3],)))
                else:
                    if record:
                        events.append(Event(t, ev[1], ev[3], ev[4]))
            for pid, st, outs in groups[t % T]:
                if not live[pid]:
                    continue
                if record:
                    events.append(Event(t, 0, "tick", (pid,)))
                if known:
                    hb = st.hb_leader
                    if hb <= 1 or not outs:
                        continue
                    ldr = st.leader
                    hbm1 = hb - 1
                    last_send[pid] = t
                    last_send_for[ldr] = t
                    for ch in outs:
                        nsends += 1
                        if record:
                            sends.append((t, pid, ch.dst, ldr, hbm1))
                        # inline fast path: consume a sampled drop run
                        if t >= ch.stab and ch.skip > 0 and ch.misses != ch.km1:
                            ch.skip -= 1
                            ch.misses += 1
                            continue
                        out = channel_on_send(ch, t)
                        if out is not None:
                            self._seq += 1
                            heappush(q, (out, self._seq, _DELIVER,
                                         ch.dst, pid, ldr, hbm1, t))
                else:
                    if not outs:
                        continue
                    last_send[pid] = t
                    for ch in outs:
                        nsends += 1
                        msg = st.tick_message(ch.cid)
                        bits = len(encode_unknown(msg)) * 8
                        if bits > self.max_bits:
                            self.max_bits = bits
                        if msg.pending:
                            self.last_nonempty[ch.cid] = t
                        elif bits > self.max_bits_empty:
                            self.max_bits_empty = bits
                        if msg.leader is not None:
                            last_send_for[msg.leader] = t
                        if record:
                            sends.append((t, pid, ch.dst, ch.cid, msg))
                        out = channel_on_send(ch, t)
                        if out is not None:
                            self._seq += 1
                            heappush(q, (out, self._seq, _DELIVER,
                                         ch.dst, pid, ch.cid, msg, t))
            self.now = t
        self.now = horizon
        self.total_sends += nsends
        self.total_deliveries += ndeliv
