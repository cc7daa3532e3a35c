"""Leader election without prior knowledge of the membership.

Processes start knowing nobody but themselves and learn ids through
gossip piggybacked on the heartbeat traffic: every message carries a
set of (label, id) pairs, where a NEW pair announces an id and an ACK
pair confirms one. An announcement is repeated until the peer on that
link shows it knows the id, after which the acknowledgment itself is
retired; with a fixed membership all pending sets eventually drain and
messages shrink to the leader fields alone.

A process's advertised reach is the size of its known set, so the hop
budget grows as discovery proceeds. Leader monitoring is simpler than
in the known-membership variant: one adaptive timeout per known id,
a hop budget that only moves up while the watchdog is live, and a
demotion to self-candidacy when the leader's watchdog expires.
"""

from __future__ import annotations

from .core import AliveUnknown, Label

_NEW = Label.NEW
_ACK = Label.ACK


def _noop(*_args):
    return None


class UnknownProcess:
    """Election state for one process on a set of bidirectional links.

    `links` are the channel ids this process can send on; replies to a
    message go out on the link it arrived on. The engine reads fresh
    messages via `tick_message`, feeds deliveries to `on_alive` and
    timer pops to `timer_fired`, and injects `arm`/`note` callbacks.
    """

    __slots__ = ("pid", "links", "leader", "known", "hopbound", "timeout",
                 "deadline", "gen", "pending", "use_seq", "_seq", "arm", "note")

    def __init__(self, pid, links, arm=None, note=None, use_seq=False):
        if pid < 1:
            raise ValueError(f"pid {pid} must be >= 1")
        links = tuple(links)
        if len(set(links)) != len(links):
            raise ValueError("duplicate link ids")
        self.pid = pid
        self.links = links
        self.leader = pid
        self.known = {pid}
        self.hopbound = {pid: 1}
        self.timeout = {}
        self.deadline = {}
        self.gen = {}
        self.pending = {cid: {(_NEW, pid)} for cid in links}
        self.use_seq = use_seq
        self._seq = 0
        self.arm = arm or _noop
        self.note = note or _noop

    def tick_message(self, cid) -> AliveUnknown:
        seq = None
        if self.use_seq:
            self._seq += 1
            seq = self._seq
        hb = self.hopbound[self.leader]
        pend = frozenset(self.pending[cid])
        if hb > 1:
            return AliveUnknown(self.leader, hb - 1, pend, seq)
        return AliveUnknown(None, None, pend, seq)

    def on_alive(self, cid, msg, now):
        mypend = self.pending[cid]
        known = self.known
        scratch = set()
        # membership pass; sorted for a canonical discovery order
        for label, k in sorted(msg.pending):
            if label == _NEW:
                scratch.add(k)
                if k not in known:
                    known.add(k)
                    self.hopbound[self.pid] += 1
                    self.hopbound[k] = 0
                    self.timeout[k] = 1
                    self.deadline[k] = now + 1
                    g = self.gen.get(k, 0) + 1
                    self.gen[k] = g
                    self.arm(now + 1, k, g)
                    pair = (_NEW, k)
                    for other, pend in self.pending.items():
                        if other != cid:
                            pend.add(pair)
                else:
                    mypend.discard((_NEW, k))
                    mypend.add((_ACK, k))
            else:
                mypend.discard((_NEW, k))
        stale = [p for p in mypend if p[0] == _ACK and p[1] not in scratch]
        for p in stale:
            mypend.discard(p)
        # leader pass
        ell = msg.leader
        if ell is None or ell == self.pid or ell > self.leader:
            return
        assert ell in known, "a leader claim must ride behind its announcement"
        old = self.leader
        self.leader = ell
        expired = self.deadline[ell] <= now
        if expired or msg.hopbound >= self.hopbound[ell]:
            self.hopbound[ell] = msg.hopbound
            if expired:
                self.timeout[ell] *= 2
            self.deadline[ell] = now + self.timeout[ell]
            g = self.gen[ell] + 1
            self.gen[ell] = g
            self.arm(self.deadline[ell], ell, g)
        if ell != old:
            self.note(now, ell)

    def timer_fired(self, k, gen, now):
        """Handle a watchdog pop; returns False when the pop is stale."""
        if self.gen.get(k) != gen:
            return False
        if k == self.leader and k != self.pid:
            self.leader = self.pid
            self.note(now, self.pid)
        return True
