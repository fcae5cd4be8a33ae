"""
Tests for the key-management pair: serving, synchronization, ledger and persistence.
"""
import json
import random
import re
import threading
import uuid

import numpy as np
import pytest

from src.core.exceptions import (
    KeyAlreadyConsumedError,
    MalformedRequestError,
    PeerSyncError,
    PoolExhaustedError,
    UnknownKeyIdError,
)
from src.kms import (
    KeyState,
    KeyStore,
    KmsPair,
    LedgerEvent,
    LedgerEventType,
    LedgerLog,
    LedgerState,
    LocalPeerLink,
    Role,
    TraceFeeder,
    replay_schedule,
)
from src.kms.ledger import KEYS_BANNER
from src.pool import ConsumptionSchedule, post_failure_uptime, simulate_pool
from src.qkd import KeyGenTrace, accumulated_key, calibrated_channel, synthesize_trace


@pytest.fixture
def pair():
    """In-memory pair"""
    return KmsPair.in_memory()


class FailingPeer:
    def forward(self, key_id, key_bytes, size_bits):
        raise PeerSyncError("peer unreachable")

    def consumed(self, key_id):
        pass

    def block_state(self, key_id):
        raise PeerSyncError("peer unreachable")


class Crash(Exception):
    pass


class CrashingPeer:
    def forward(self, key_id, key_bytes, size_bits):
        raise Crash()

    def consumed(self, key_id):
        pass


class MirrorThenCrash:
    """The peer mirrors the block, then A dies before logging the acknowledgement."""

    def __init__(self, store):
        self.store = store

    def forward(self, key_id, key_bytes, size_bits):
        self.store.accept_forward(key_id, key_bytes, size_bits)
        raise Crash()

    def consumed(self, key_id):
        pass


class TestServing:
    """get_key / get_key_by_id contract."""

    def test_debit(self, pair):
        """1,000 bits, request 256, 744 left on both servers."""
        pair.credit(1_000)
        block = pair.get_key(256)
        assert len(block.key_bytes) == 32
        assert pair.a.available_bits == 744
        assert pair.b.available_bits == 744

    def test_refusal_leaves_state(self, pair):
        """A request above the pool is refused and changes nothing."""
        pair.credit(100)
        before = pair.a.ledger_state()
        with pytest.raises(PoolExhaustedError):
            pair.get_key(256)
        assert pair.a.ledger_state() == before
        assert pair.available_bits == 100

    def test_distinct_ids(self, pair):
        """Two requests get two key IDs."""
        pair.credit(1_024)
        assert pair.get_key(256).key_id != pair.get_key(256).key_id

    def test_same_bytes_on_both_sides(self, pair):
        """B delivers exactly what A served."""
        pair.credit(4_096)
        block = pair.get_key(512)
        assert pair.get_key_by_id(block.key_id) == block.key_bytes

    def test_unknown_id(self, pair):
        """A never-issued UUID is unknown."""
        with pytest.raises(UnknownKeyIdError):
            pair.get_key_by_id(uuid.uuid4())

    def test_double_fetch(self, pair):
        """B delivers each key once."""
        pair.credit(256)
        block = pair.get_key(256)
        pair.get_key_by_id(block.key_id)
        with pytest.raises(KeyAlreadyConsumedError):
            pair.get_key_by_id(block.key_id)

    def test_retired_after_both_roles(self, pair):
        """Blocks are wiped on both servers once B delivered them."""
        pair.credit(256)
        block = pair.get_key(256)
        pair.get_key_by_id(block.key_id)
        for store in (pair.a, pair.b):
            assert store.block(block.key_id).state is KeyState.RETIRED
            assert store.block(block.key_id).key_bytes == b""

    def test_size_must_be_whole_bytes(self, pair):
        """Key sizes are positive multiples of 8 bits."""
        pair.credit(1_000)
        for size in (0, -8, 12):
            with pytest.raises(MalformedRequestError):
                pair.get_key(size)

    def test_roles(self, pair):
        """enc_keys is A-only and dec_keys is B-only."""
        pair.credit(256)
        with pytest.raises(MalformedRequestError):
            pair.b.enc_keys(256)
        with pytest.raises(MalformedRequestError):
            pair.a.dec_keys([uuid.uuid4()])

    def test_multi_key_all_or_nothing(self, pair):
        """Several keys in one request are served together or not at all."""
        pair.credit(600)
        with pytest.raises(PoolExhaustedError):
            pair.a.enc_keys(256, number=3)
        assert len(pair.a.enc_keys(256, number=2)) == 2
        assert pair.available_bits == 88

    def test_peer_failure_refunds(self):
        """An unacknowledged forward is refunded and retired."""
        store = KeyStore(Role.A, peer=FailingPeer())
        store.credit(1_000)
        with pytest.raises(PeerSyncError):
            store.enc_keys(256)
        assert store.available_bits == 1_000
        assert store.status()["retired_count"] == 1


class TestCredits:
    """Pool credits and failure windows."""

    def test_zero_credit_is_noop(self, pair):
        """Crediting 0 bits records nothing."""
        pair.credit(0)
        assert pair.a.ledger_state()["offset"] == 0

    def test_negative_credit_rejected(self, pair):
        """Credits cannot be negative."""
        with pytest.raises(MalformedRequestError):
            pair.credit(-1)

    def test_failure_drops_credits(self, pair):
        """Credits during a failure are lost; restore resumes them."""
        pair.credit(1_000)
        pair.inject_failure()
        pair.credit(5_000)
        assert pair.available_bits == 1_000
        assert pair.a.dropped_bits == 5_000
        pair.restore()
        pair.credit(5_000)
        assert pair.available_bits == 6_000

    def test_failure_without_demand_freezes(self, pair):
        """No credits and no requests leave the ledger as it was."""
        pair.credit(2_048)
        pair.inject_failure()
        frozen = pair.a.ledger_state()
        for _ in range(10):
            pair.credit(100)
        assert pair.a.ledger_state() == frozen

    def test_feeder_matches_accumulation(self, pair):
        """Feeding a trace credits exactly the accumulated key bits."""
        trace = synthesize_trace(calibrated_channel(70), 5_000.0, seed=4)
        feeder = TraceFeeder(pair, trace)
        for t_s in (100.0, 1_000.0, 2_500.0, 5_000.0):
            feeder.advance_to(t_s)
            assert pair.a.credited_bits == accumulated_key(trace, t_s)
            assert pair.b.credited_bits == pair.a.credited_bits

    def test_feeder_failure_window(self, pair):
        """Events completing inside the failure window are dropped."""
        trace = KeyGenTrace.from_completions([10.0, 20.0, 30.0, 40.0], [100.0] * 4)
        feeder = TraceFeeder(pair, trace, failure_at_s=15.0, restore_at_s=30.0)
        feeder.advance_to(50.0)
        assert pair.available_bits == 2_000


class TestInterleaving:
    """Protocol guarantees under long random operation sequences."""

    def test_hundred_thousand_operations(self, pair):
        """No double serving, identical bytes, conservation at every checkpoint."""
        rng = random.Random(11)
        served_a = {}
        delivered_b = []
        outstanding = []
        for op in range(100_000):
            choice = rng.random()
            if choice < 0.3:
                pair.credit(rng.randrange(0, 4_096))
            elif choice < 0.65:
                size = 8 * rng.randrange(1, 64)
                try:
                    block = pair.get_key(size)
                except PoolExhaustedError:
                    continue
                assert block.key_id not in served_a
                served_a[block.key_id] = block.key_bytes
                outstanding.append(block.key_id)
            elif choice < 0.9 and outstanding:
                key_id = outstanding.pop(rng.randrange(len(outstanding)))
                assert pair.get_key_by_id(key_id) == served_a[key_id]
                delivered_b.append(key_id)
            elif choice < 0.95 and delivered_b:
                with pytest.raises(KeyAlreadyConsumedError):
                    pair.get_key_by_id(rng.choice(delivered_b))
            else:
                with pytest.raises(UnknownKeyIdError):
                    pair.get_key_by_id(uuid.uuid4())
            if op % 1_000 == 0:
                assert pair.check_conservation()
                assert pair.a.available_bits == pair.b.available_bits
        assert pair.check_conservation()
        assert len(delivered_b) == len(set(delivered_b))

    def test_concurrent_clients(self, pair):
        """Parallel senders never receive the same key ID."""
        pair.credit(4 * 200 * 256)
        ids = []
        errors = []
        lock = threading.Lock()

        def worker():
            try:
                for _ in range(200):
                    block = pair.get_key(256)
                    assert pair.get_key_by_id(block.key_id) == block.key_bytes
                    with lock:
                        ids.append(block.key_id)
            except Exception as e:
                errors.append(e)

        threads = [threading.Thread(target=worker) for _ in range(4)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert not errors
        assert len(ids) == len(set(ids)) == 800
        assert pair.available_bits == 0
        assert pair.check_conservation()


class TestPersistence:
    """Append-only log, snapshots and restart."""

    def run_traffic(self, pair, operations=2_000, seed=5):
        rng = random.Random(seed)
        outstanding = []
        for _ in range(operations):
            choice = rng.random()
            if choice < 0.4:
                pair.credit(rng.randrange(1, 2_048))
            elif choice < 0.75:
                try:
                    outstanding.append(pair.get_key(8 * rng.randrange(1, 32)).key_id)
                except PoolExhaustedError:
                    pass
            elif outstanding:
                pair.get_key_by_id(outstanding.pop(0))
        return outstanding

    def test_crash_restart_replays_identically(self, tmp_path):
        """A store rebuilt from snapshot plus log tail equals the live one."""
        pair = KmsPair.open(tmp_path, snapshot_interval=37)
        outstanding = self.run_traffic(pair)
        live_a, live_b = pair.a.ledger_state(), pair.b.ledger_state()

        restarted_a = KeyStore(Role.A, data_dir=tmp_path / "a")
        restarted_b = KeyStore(Role.B, data_dir=tmp_path / "b")
        assert restarted_a.ledger_state() == live_a
        assert restarted_b.ledger_state() == live_b
        for key_id in outstanding:
            assert restarted_b.block(key_id).key_bytes == pair.b.block(key_id).key_bytes

    def test_close_and_reopen(self, tmp_path):
        """A clean shutdown snapshots the full ledger."""
        pair = KmsPair.open(tmp_path)
        self.run_traffic(pair, operations=300)
        state = pair.a.ledger_state()
        pair.close()
        reopened = KeyStore(Role.A, data_dir=tmp_path / "a")
        assert reopened.ledger_state() == state
        assert reopened.check_conservation()

    def test_log_format(self, tmp_path):
        """Ledger lines are timestamp_ns|event|key_id|bits; key material is marked."""
        pair = KmsPair.open(tmp_path)
        pair.credit(512)
        block = pair.get_key(256)
        pair.close()
        lines = (tmp_path / "a" / "ledger.log").read_text().splitlines()
        assert re.fullmatch(r"\d+\|credit\|-\|512", lines[0])
        assert re.fullmatch(rf"\d+\|serve_a\|{block.key_id}\|256", lines[1])
        keys = (tmp_path / "a" / "keys.log").read_text().splitlines()
        assert keys[0] == KEYS_BANNER
        assert keys[1] == f"{block.key_id}|{block.key_bytes.hex()}"

    def test_log_events_round_trip(self, tmp_path):
        """Every recorded event parses back from its line."""
        pair = KmsPair.open(tmp_path)
        self.run_traffic(pair, operations=200)
        pair.close()
        events = list(LedgerLog(tmp_path / "b").events())
        assert events
        assert all(event.bits >= 0 for event in events)

    def test_unconfirmed_serve_refunded_on_restart(self, tmp_path):
        """A serve interrupted before the peer acknowledged is refunded at recovery."""
        store = KeyStore(Role.A, peer=CrashingPeer(), data_dir=tmp_path)
        store.credit(1_000)
        with pytest.raises(Crash):
            store.enc_keys(256)
        assert store.available_bits == 744

        restarted = KeyStore(Role.A, data_dir=tmp_path)
        assert restarted.available_bits == 1_000
        assert restarted.status()["retired_count"] == 1

    @staticmethod
    def crash_after_mirror(tmp_path):
        """A serve that reached B but not A's log; returns B and the key ID."""
        store_b = KeyStore(Role.B)
        store_b.credit(1_000)
        store_a = KeyStore(Role.A, peer=MirrorThenCrash(store_b), data_dir=tmp_path)
        store_a.credit(1_000)
        with pytest.raises(Crash):
            store_a.enc_keys(256)
        key_id = uuid.UUID(next(iter(store_b.ledger_state()["blocks"])))
        return store_b, key_id

    def test_restart_keeps_serve_the_peer_mirrored(self, tmp_path):
        """A block B already holds stays served on A, so the pools agree."""
        store_b, key_id = self.crash_after_mirror(tmp_path)

        restarted = KeyStore(Role.A, peer=LocalPeerLink(store_b), data_dir=tmp_path)
        assert restarted.unsettled_count == 0
        assert restarted.available_bits == store_b.available_bits == 744
        assert restarted.block(key_id).confirmed
        assert restarted.status()["retired_count"] == 0

        key_bytes = restarted.block(key_id).key_bytes
        store_b.peer = LocalPeerLink(restarted)
        assert store_b.dec_keys([key_id])[0].key_bytes == key_bytes
        assert restarted.block(key_id).state is KeyState.RETIRED

    def test_restart_retires_serve_the_peer_delivered(self, tmp_path):
        """B delivered the block while A was down; A retires it on recovery."""
        store_b, key_id = self.crash_after_mirror(tmp_path)
        store_b.dec_keys([key_id])

        restarted = KeyStore(Role.A, peer=LocalPeerLink(store_b), data_dir=tmp_path)
        assert restarted.block(key_id).state is KeyState.RETIRED
        assert restarted.available_bits == store_b.available_bits == 744
        assert restarted.check_conservation()

    def test_unreachable_peer_defers_settlement(self, tmp_path):
        """Serves stay debited until the peer answers, then settle before the next serve."""
        store = KeyStore(Role.A, peer=CrashingPeer(), data_dir=tmp_path)
        store.credit(1_000)
        with pytest.raises(Crash):
            store.enc_keys(256)

        restarted = KeyStore(Role.A, peer=FailingPeer(), data_dir=tmp_path)
        assert restarted.unsettled_count == 1
        assert restarted.available_bits == 744

        store_b = KeyStore(Role.B)
        store_b.credit(1_000)
        restarted.peer = LocalPeerLink(store_b)
        restarted.enc_keys(256)
        assert restarted.unsettled_count == 0
        assert restarted.available_bits == store_b.available_bits == 744
        assert restarted.status()["retired_count"] == 1

    def test_reopened_pair_settles_against_peer(self, tmp_path):
        """A persistent pair recovers B first and settles A against it."""
        pair = KmsPair.open(tmp_path)
        pair.credit(1_000)
        pair.a.peer = MirrorThenCrash(pair.b)
        with pytest.raises(Crash):
            pair.get_key(256)
        pair.close()

        reopened = KmsPair.open(tmp_path)
        assert reopened.a.available_bits == reopened.b.available_bits == 744
        blocks_a, blocks_b = reopened.a.ledger_state()["blocks"], reopened.b.ledger_state()["blocks"]
        assert blocks_a.keys() == blocks_b.keys()
        assert all(block["confirmed"] for block in blocks_a.values())

    def test_snapshot_keeps_retired_ids(self, tmp_path):
        """Pruned blocks still count as delivered and as already forwarded."""
        pair = KmsPair.open(tmp_path, snapshot_interval=0)
        pair.credit(1_024)
        done = pair.get_key(256)
        pair.get_key_by_id(done.key_id)
        live = pair.get_key(256)
        pair.a.snapshot()
        pair.b.snapshot()

        with pytest.raises(KeyAlreadyConsumedError):
            pair.get_key_by_id(done.key_id)
        with pytest.raises(KeyAlreadyConsumedError):
            pair.b.accept_forward(done.key_id, bytes(32), 256)
        pair.a.mark_consumed(done.key_id)
        assert pair.a.block(done.key_id).state is KeyState.RETIRED
        assert pair.b.status()["retired_count"] == 1
        assert pair.b.status()["served_count"] == 2
        pair.close()

        snapshot = json.loads((tmp_path / "b" / "snapshot.json").read_text())
        assert list(snapshot["blocks"]) == [str(live.key_id)]
        assert snapshot["retired"] == [str(done.key_id)]

        reopened = KmsPair.open(tmp_path)
        assert reopened.get_key_by_id(live.key_id) == live.key_bytes
        with pytest.raises(KeyAlreadyConsumedError):
            reopened.get_key_by_id(done.key_id)


class TestLedgerState:
    """Block index kept by the ledger."""

    def test_prune_moves_retired_blocks_to_ids(self):
        key_id, other = uuid.uuid4(), uuid.uuid4()
        state = LedgerState()
        events = [
            (LedgerEventType.CREDIT, None, 512),
            (LedgerEventType.SERVE_A, key_id, 256),
            (LedgerEventType.SERVE_A, other, 256),
            (LedgerEventType.PEER_A, key_id, 256),
            (LedgerEventType.SERVE_B, key_id, 256),
            (LedgerEventType.RETIRE, key_id, 256),
        ]
        for index, (kind, block_id, bits) in enumerate(events):
            state.apply(LedgerEvent(index, kind, block_id, bits), bytes(bits // 8) if block_id else None)
        before = state.to_dict()

        assert state.prune() == 1
        assert list(state.blocks) == [other]
        assert state.retired == {key_id}
        assert state.knows(key_id)
        assert state.count(KeyState.RETIRED) == 1
        assert state.to_dict() == before
        assert state.prune() == 0

    def test_snapshot_dict_restores_retired_ids(self):
        key_id = uuid.uuid4()
        state = LedgerState(credited_bits=256, debited_bits=256, offset=4, retired={key_id})
        restored = LedgerState.from_dict(state.to_dict(), {})
        assert restored.retired == {key_id}
        assert restored.blocks == {}
        assert restored.available_bits == 0


class TestReplayAgainstPool:
    """The live pair tracks the analytical pool ledger."""

    def test_random_schedules(self):
        """Available bits equal d[k] until the first refusal."""
        rng = np.random.default_rng(31)
        for _ in range(150):
            step_s = float(rng.choice([0.5, 1.0, 2.0]))
            horizon = int(rng.integers(5, 200))
            ends = np.cumsum(rng.uniform(0.5, 12.0, size=300))
            count = int(np.searchsorted(ends, horizon * step_s)) + 1
            trace = KeyGenTrace.from_completions(ends[:count], rng.uniform(0.0, 3_000.0, size=count))
            lead = int(rng.integers(0, horizon))
            schedule = ConsumptionSchedule(
                step_s=step_s,
                lead_steps=lead,
                normal_bits_per_period=8 * int(rng.integers(0, 400)),
                post_failure_bits_per_period=8 * int(rng.integers(0, 400)),
                fail_step=int(rng.integers(lead, horizon + 1)) if rng.random() < 0.5 else None,
                initial_bits=int(rng.integers(0, 5_000)),
            )
            timeline = simulate_pool(trace, schedule, horizon)
            result = replay_schedule(KmsPair.in_memory(), trace, schedule, horizon)

            stop = horizon + 1 if result.first_refusal_step is None else result.first_refusal_step
            assert result.available_bits[:stop] == timeline.d_bits[:stop].tolist()
            assert result.first_unavailable_step == timeline.first_unavailable_step()

    def test_exhaustion_at_predicted_uptime(self):
        """After a failure the pair runs dry exactly when the pool model says."""
        ends = np.arange(10.0, 610.0, 10.0)
        trace = KeyGenTrace.from_completions(ends, np.full(len(ends), 3_000.0))
        schedule = ConsumptionSchedule(
            lead_steps=60,
            normal_bits_per_period=2_176,
            post_failure_bits_per_period=2_176,
            fail_step=300,
        )
        uptime = post_failure_uptime(trace, schedule)
        result = replay_schedule(KmsPair.in_memory(), trace, schedule, 600)
        assert result.first_unavailable_step == schedule.fail_step + int(uptime / schedule.step_s)

    def test_restore_before_exhaustion(self):
        """Key generation back in time means no refusal ever surfaces."""
        ends = np.arange(10.0, 1_010.0, 10.0)
        trace = KeyGenTrace.from_completions(ends, np.full(len(ends), 3_000.0))
        pair = KmsPair.in_memory()
        feeder = TraceFeeder(pair, trace, failure_at_s=200.0, restore_at_s=260.0)
        for k in range(1, 1_001):
            feeder.advance_to(float(k))
            if k > 30:
                block = pair.get_key(2_176)
                pair.get_key_by_id(block.key_id)
        assert pair.check_conservation()
