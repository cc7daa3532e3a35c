import pytest
from hypothesis import given, strategies as st

from omegasim.core import AliveUnknown, Label
from omegasim.unknown import UnknownProcess

NEW, ACK = Label.NEW, Label.ACK


def recording(proc):
    arms, notes = [], []
    proc.arm = lambda deadline, k, gen: arms.append((deadline, k, gen))
    proc.note = lambda t, new: notes.append((t, new))
    return arms, notes


def alive(leader, hb, *pairs, seq=None):
    return AliveUnknown(leader, hb, frozenset(pairs), seq)


class TestInitialState:
    def test_knows_only_itself(self):
        p = UnknownProcess(9, links=(0, 3))
        assert p.leader == 9
        assert p.known == {9}
        assert p.hopbound[9] == 1
        assert p.pending[0] == {(NEW, 9)}
        assert p.pending[3] == {(NEW, 9)}

    def test_solitary_ticks_carry_no_leader(self):
        p = UnknownProcess(9, links=(0,))
        msg = p.tick_message(0)
        assert msg == alive(None, None, (NEW, 9))

    def test_rejects_duplicate_links(self):
        with pytest.raises(ValueError):
            UnknownProcess(1, links=(0, 0))


class TestMembership:
    def test_first_sight_no_ack_and_self_reach_grows(self):
        # hand-worked two-node exchange, receiver side
        p = UnknownProcess(9, links=(0,))
        arms, _ = recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        assert p.known == {5, 9}
        assert p.hopbound[9] == 2
        assert p.hopbound[5] == 0
        assert arms == [(3, 5, 1)]           # watchdog armed one unit out
        assert p.pending[0] == {(NEW, 9)}    # crucially, no ack yet
        assert p.tick_message(0) == alive(9, 1, (NEW, 9))

    def test_second_sight_acknowledges(self):
        p = UnknownProcess(9, links=(0,))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        p.on_alive(0, alive(5, 1, (NEW, 5)), 4)
        assert p.pending[0] == {(NEW, 9), (ACK, 5)}

    def test_discovery_propagates_to_other_links_only(self):
        p = UnknownProcess(4, links=(0, 1))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 7)), 2)
        assert p.pending[0] == {(NEW, 4)}
        assert p.pending[1] == {(NEW, 4), (NEW, 7)}

    def test_ack_stops_own_announcement(self):
        p = UnknownProcess(4, links=(0,))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 7), (ACK, 4)), 2)
        assert p.pending[0] == set()         # (NEW,4) consumed, no ack added yet

    def test_relayed_announcement_replaced_by_ack(self):
        p = UnknownProcess(4, links=(0, 1))
        recording(p)
        p.on_alive(1, alive(None, None, (NEW, 7)), 2)   # now relaying 7 on link 0
        p.on_alive(0, alive(None, None, (NEW, 7)), 3)   # but 0's peer knows 7 too
        assert p.pending[0] == {(NEW, 4), (ACK, 7)}

    def test_ack_dropped_once_announcement_stops(self):
        p = UnknownProcess(9, links=(0,))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        p.on_alive(0, alive(5, 1, (NEW, 5)), 4)
        assert (ACK, 5) in p.pending[0]
        p.on_alive(0, alive(5, 1), 6)        # sender no longer announces itself
        assert (ACK, 5) not in p.pending[0]

    def test_ack_kept_while_announcement_repeats(self):
        p = UnknownProcess(9, links=(0,))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        p.on_alive(0, alive(5, 1, (NEW, 5)), 4)
        p.on_alive(0, alive(5, 1, (NEW, 5)), 5)
        assert (ACK, 5) in p.pending[0]

    def test_own_id_announced_back_gets_acked(self):
        # the peer evidently knows us: our own announcement retires too
        p = UnknownProcess(4, links=(0,))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 4)), 2)
        assert p.known == {4}
        assert p.pending[0] == {(ACK, 4)}


class TestLeaderPass:
    def test_adoption_with_stale_watchdog_doubles_timeout(self):
        # continuation of the same hand trace: discovery at 2, claim at 4
        p = UnknownProcess(9, links=(0,))
        arms, notes = recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        p.on_alive(0, alive(5, 1, (NEW, 5)), 4)
        assert p.leader == 5
        assert p.hopbound[5] == 1
        assert notes == [(4, 5)]
        assert arms[-1] == (6, 5, 2)         # timeout 1 -> 2, armed at 4+2
        p.on_alive(0, alive(5, 1, (ACK, 9)), 6)
        assert arms[-1] == (10, 5, 3)        # expired again: timeout 4
        assert p.pending[0] == set()

    def test_larger_id_not_adopted(self):
        p = UnknownProcess(4, links=(0,))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 7)), 2)
        p.on_alive(0, alive(7, 3, (NEW, 7)), 3)
        assert p.leader == 4

    def test_own_id_as_leader_ignored(self):
        p = UnknownProcess(4, links=(0,))
        arms, notes = recording(p)
        p.on_alive(0, alive(4, 2, (NEW, 4)), 5)
        assert p.leader == 4 and notes == []

    def test_timely_smaller_hopbound_rejected(self):
        p = UnknownProcess(9, links=(0,))
        arms, _ = recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        p.on_alive(0, alive(5, 6, (NEW, 5)), 4)   # hopbound 6, deadline 6
        assert p.hopbound[5] == 6
        n_arms = len(arms)
        p.on_alive(0, alive(5, 3), 5)             # timely but smaller: ignored
        assert p.hopbound[5] == 6
        assert len(arms) == n_arms                # and no watchdog refresh either

    def test_timely_larger_hopbound_accepted_without_doubling(self):
        p = UnknownProcess(9, links=(0,))
        arms, _ = recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        p.on_alive(0, alive(5, 3, (NEW, 5)), 4)   # timeout 2, deadline 6
        p.on_alive(0, alive(5, 7), 5)
        assert p.hopbound[5] == 7
        assert arms[-1] == (7, 5, 3)              # timeout still 2

    def test_expired_smaller_hopbound_accepted(self):
        p = UnknownProcess(9, links=(0,))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        p.on_alive(0, alive(5, 6, (NEW, 5)), 4)   # deadline 6
        p.on_alive(0, alive(5, 2), 9)             # late: accepted despite 2 < 6
        assert p.hopbound[5] == 2


class TestWatchdog:
    def test_leader_silence_demotes_to_self(self):
        p = UnknownProcess(9, links=(0,))
        arms, notes = recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        p.on_alive(0, alive(5, 1, (NEW, 5)), 4)   # gen 2, deadline 6
        assert p.timer_fired(5, 2, 6)
        assert p.leader == 9
        assert notes == [(4, 5), (6, 9)]
        assert p.tick_message(0) == alive(9, 1, (NEW, 9), (ACK, 5))

    def test_stale_generation_ignored(self):
        p = UnknownProcess(9, links=(0,))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5)), 2)
        p.on_alive(0, alive(5, 1, (NEW, 5)), 4)
        assert not p.timer_fired(5, 1, 3)         # discovery watchdog, re-armed
        assert p.leader == 5

    def test_non_leader_silence_changes_nothing(self):
        p = UnknownProcess(9, links=(0,))
        recording(p)
        p.on_alive(0, alive(None, None, (NEW, 5), (NEW, 7)), 2)
        p.on_alive(0, alive(5, 1, (NEW, 5)), 4)
        assert p.timer_fired(7, 1, 3)
        assert p.leader == 5


class TestSequenceNumbers:
    def test_disabled_by_default(self):
        p = UnknownProcess(1, links=(0,))
        assert p.tick_message(0).seq is None

    def test_monotone_when_enabled(self):
        p = UnknownProcess(1, links=(0, 1), use_seq=True)
        seqs = [p.tick_message(cid).seq for cid in (0, 1, 0)]
        assert seqs == [1, 2, 3]


@st.composite
def message_streams(draw):
    """Streams whose leader claims are always preceded by announcements."""
    ops = []
    announced = []
    pool = st.integers(2, 8)
    for _ in range(draw(st.integers(0, 40))):
        link = draw(st.sampled_from((0, 1)))
        news = draw(st.lists(pool, max_size=3))
        acks = draw(st.lists(pool, max_size=2))
        announced.extend(news)
        if announced and draw(st.booleans()):
            ell = draw(st.sampled_from(announced))
            hb = draw(st.integers(1, 9))
        else:
            ell = hb = None
        dt = draw(st.integers(0, 4))
        ops.append((link, ell, hb, news, acks, dt))
    return ops


@given(message_streams())
def test_membership_invariants_hold(ops):
    p = UnknownProcess(5, links=(0, 1))
    recording(p)
    now = 1
    for link, ell, hb, news, acks, dt in ops:
        now += dt
        pairs = {(NEW, k) for k in news} | {(ACK, k) for k in acks}
        if ell is not None:
            pairs.add((NEW, ell))  # claims ride with an announcement
        p.on_alive(link, AliveUnknown(ell, hb, frozenset(pairs)), now)
        assert p.leader in p.known
        assert p.hopbound[p.pid] == len(p.known)
        assert p.known <= {5} | set(range(2, 9))
        for cid in (0, 1):
            for label, k in p.pending[cid]:
                assert label in (NEW, ACK) and 1 <= k <= 8
            p.tick_message(cid)  # must stay well-formed and encodable
