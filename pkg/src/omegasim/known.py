"""Leader election with known membership over partially reliable channels.

Every process starts as its own candidate and relays the smallest id it
hears about, decrementing a hop budget so stale claims die out. For each
pair (candidate, hop budget) the process keeps an adaptive timeout; a
candidate whose every budget row has gone silent is abandoned and the
process promotes itself again. The advertised budget is the largest one
with a live timer: the shortest relay path currently heard from, which
is the conservative pick because a larger budget survives more hops.
Each slot also counts its expiries; the count is monotone and recorded
alongside the timeout so a flaky path's history stays visible.

State is kept sparse. A (j, x) slot that was never armed behaves as if
it were armed at time 0 with timeout 1 and penalty -1: it is expired at
any time >= 1, which is when the first message can possibly arrive.
"""

from __future__ import annotations


def _noop(*_args):
    return None


# slot layout: [deadline, timeout, penalty, generation]
_DL, _TO, _PEN, _GEN = 0, 1, 2, 3


def select_hopbound(row, now):
    """Largest hop budget among slots with a live timer.

    Returns None when every slot in the row has expired (a missing slot
    is expired by construction, so only stored slots can be live).
    Preferring the largest live budget keeps relays talking: a budget
    fed by a short path tolerates the most downstream hops, and a path
    that dies stops being live once its adaptive timeout runs out, so
    the selection falls back to longer routes only while it must.
    """
    best = 0
    for x, slot in row.items():
        if x > best and slot[_DL] > now:
            best = x
    return best or None


class KnownProcess:
    """Per-process election state for a network of n named processes.

    The engine drives it: reads `leader`/`hb_leader` each tick to form
    outgoing messages, feeds deliveries to `on_alive` and timer pops to
    `timer_fired`, and injects `arm`/`note` callbacks for scheduling
    timers and logging leadership transitions.
    """

    __slots__ = ("pid", "n", "leader", "hb_leader", "rows", "arm", "note")

    def __init__(self, pid, n, arm=None, note=None):
        if n < 1:
            raise ValueError(f"need at least one process, got n={n}")
        if not 1 <= pid <= n:
            raise ValueError(f"pid {pid} outside 1..{n}")
        self.pid = pid
        self.n = n
        self.leader = pid
        self.hb_leader = n  # mirrors hopbound[leader]; own entry is n forever
        self.rows = {}      # j -> {x -> [deadline, timeout, penalty, gen]}
        self.arm = arm or _noop
        self.note = note or _noop

    def on_alive(self, ell, hb, now):
        if ell == self.pid or ell > self.leader:
            return
        old = self.leader
        self.leader = ell
        row = self.rows.get(ell)
        if row is None:
            row = self.rows[ell] = {}
        slot = row.get(hb)
        if slot is None:
            slot = row[hb] = [1, 1, -1, 0]
        if slot[_DL] <= now:
            slot[_TO] *= 2
        slot[_DL] = now + slot[_TO]
        slot[_GEN] += 1
        self.arm(slot[_DL], (ell, hb), slot[_GEN])
        self.hb_leader = select_hopbound(row, now)  # just re-armed: never None
        if ell != old:
            self.note(now, ell)

    def timer_fired(self, key, gen, now):
        """Handle a timer pop; returns False when the pop is stale."""
        j, x = key
        slot = self.rows[j][x]
        if slot[_GEN] != gen:
            return False
        if j == self.leader and j != self.pid:
            slot[_PEN] += 1
            picked = select_hopbound(self.rows[j], now)
            if picked is None:
                self.leader = self.pid
                self.hb_leader = self.n
                self.note(now, self.pid)
            else:
                self.hb_leader = picked
        return True
