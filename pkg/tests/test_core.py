import random

import pytest
from hypothesis import given, strategies as st

from omegasim.core import (
    AddParams,
    AliveKnown,
    AliveUnknown,
    Label,
    compute_delta,
    decode_known,
    decode_unknown,
    encode_known,
    encode_unknown,
    known_payload_bytes,
)


class TestComputeDelta:
    def test_reference_parameters(self):
        # (K-1)*T + D at the parameter set used throughout the experiments
        assert compute_delta(4, 12, 1) == 15

    def test_single_message_window(self):
        # K=1 means every message is timely, the bound collapses to D
        assert compute_delta(1, 7, 3) == 7

    def test_slow_sender(self):
        assert compute_delta(4, 12, 10) == 42

    @pytest.mark.parametrize("bad", [0, -1, -7])
    def test_rejects_nonpositive_k(self, bad):
        with pytest.raises(ValueError):
            compute_delta(bad, 12, 1)

    def test_rejects_negative_d_and_zero_t(self):
        with pytest.raises(ValueError):
            compute_delta(4, -1, 1)
        with pytest.raises(ValueError):
            compute_delta(4, 12, 0)

    @given(
        k=st.integers(1, 50),
        d=st.integers(0, 200),
        t=st.integers(1, 50),
        dk=st.integers(0, 5),
        dd=st.integers(0, 5),
        dt=st.integers(0, 5),
    )
    def test_monotone_in_every_argument(self, k, d, t, dk, dd, dt):
        base = compute_delta(k, d, t)
        assert compute_delta(k + dk, d, t) >= base
        assert compute_delta(k, d + dd, t) >= base
        assert compute_delta(k, d, t + dt) >= base


class TestAddParams:
    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            AddParams(K=0, D=12)
        with pytest.raises(ValueError):
            AddParams(K=4, D=-1)
        with pytest.raises(ValueError):
            AddParams(K=4, D=12, stabilization=-5)

    def test_defaults(self):
        p = AddParams(K=4, D=12)
        assert p.stabilization == 0


class TestKnownEncoding:
    def test_large_n_stays_within_three_bytes(self):
        # 2 * 11 bits for n=1024, rounded up to whole bytes
        data = encode_known(AliveKnown(17, 900), n=1024)
        assert len(data) <= 3
        assert known_payload_bytes(1024) == 3

    def test_minimal_instance(self):
        data = encode_known(AliveKnown(1, 1), n=2)
        assert len(data) == 1

    def test_round_trip_seeded_sample(self):
        rng = random.Random(0xC0FFEE)
        for _ in range(1000):
            n = rng.randint(2, 4096)
            msg = AliveKnown(rng.randint(1, n), rng.randint(1, n - 1))
            assert decode_known(encode_known(msg, n), n) == msg

    @pytest.mark.parametrize(
        "leader,hopbound",
        [(0, 1), (9, 1), (1, 0), (1, 8), (-3, 2)],
    )
    def test_out_of_range_fields_rejected(self, leader, hopbound):
        with pytest.raises(ValueError):
            encode_known(AliveKnown(leader, hopbound), n=8)

    def test_decode_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            decode_known(b"\x01\x02\x03\x04", n=8)

    def test_decode_rejects_out_of_range_payload(self):
        # n=4 needs 3 bits per field; a packed value of 0 has leader 0
        with pytest.raises(ValueError):
            decode_known(b"\x00", n=4)

    @given(
        n=st.integers(2, 2048),
        data=st.data(),
    )
    def test_injective(self, n, data):
        a = AliveKnown(
            data.draw(st.integers(1, n)), data.draw(st.integers(1, n - 1))
        )
        b = AliveKnown(
            data.draw(st.integers(1, n)), data.draw(st.integers(1, n - 1))
        )
        if a != b:
            assert encode_known(a, n) != encode_known(b, n)


def _pending_strategy(max_pairs=50):
    pair = st.tuples(
        st.sampled_from([Label.NEW, Label.ACK]), st.integers(1, 1_000_000)
    )
    return st.frozensets(pair, max_size=max_pairs)


class TestUnknownEncoding:
    def test_bare_announcement_round_trips(self):
        msg = AliveUnknown(None, None, frozenset({(Label.NEW, 3)}))
        assert decode_unknown(encode_unknown(msg)) == msg

    def test_empty_pending_within_known_bound_plus_flag(self):
        msg = AliveUnknown(2, 5, frozenset())
        n = 5
        assert len(encode_unknown(msg)) <= known_payload_bytes(n) + 1

    def test_leader_and_hopbound_must_come_together(self):
        with pytest.raises(ValueError):
            AliveUnknown(3, None, frozenset())
        with pytest.raises(ValueError):
            AliveUnknown(None, 2, frozenset())

    def test_wire_hopbound_zero_rejected(self):
        with pytest.raises(ValueError):
            encode_unknown(AliveUnknown(3, 0, frozenset()))

    @given(
        leader=st.one_of(st.none(), st.integers(1, 100_000)),
        hb=st.integers(1, 100_000),
        pending=_pending_strategy(),
        seq=st.one_of(st.none(), st.integers(0, 2**40)),
    )
    def test_round_trip(self, leader, hb, pending, seq):
        msg = AliveUnknown(
            leader, hb if leader is not None else None, pending, seq
        )
        assert decode_unknown(encode_unknown(msg)) == msg

    @given(n=st.integers(2, 4096), data=st.data())
    def test_empty_pending_bound_over_field_range(self, n, data):
        # the eventual O(log n) witness: once pending drains, a message costs
        # no more than the fixed-membership payload plus one flag byte
        leader = data.draw(st.integers(1, n))
        hb = data.draw(st.integers(1, max(1, n - 1)))
        msg = AliveUnknown(leader, hb, frozenset())
        assert len(encode_unknown(msg)) <= known_payload_bytes(n) + 1

    def test_decode_rejects_trailing_bytes(self):
        data = encode_unknown(AliveUnknown(None, None, frozenset()))
        with pytest.raises(ValueError):
            decode_unknown(data + b"\x00")

    def test_seq_survives_round_trip(self):
        msg = AliveUnknown(4, 2, frozenset({(Label.ACK, 9)}), seq=12345)
        back = decode_unknown(encode_unknown(msg))
        assert back.seq == 12345
        assert back == msg
