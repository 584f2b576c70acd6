"""Durability: write-ahead logging, snapshots, crash recovery.

Uncommitted work never reaches disk (the log is written at commit, under
fsync), so dropping a store object without close() and reopening the
directory is byte-for-byte what a SIGKILL mid-transaction leaves behind.
One true-subprocess SIGKILL test anchors that equivalence.
"""

from __future__ import annotations

import os
import signal
import subprocess
import sys
import textwrap
import time

from visor.graph import GraphStore


def reopen(path) -> GraphStore:
    """Simulate a crash: abandon the live handle and recover from disk."""
    return GraphStore(path)


def test_committed_survives_reopen(tmp_dir):
    store = GraphStore(tmp_dir / "g")
    txn = store.begin()
    store.add_node(txn, "Patient", {"PatientID": "P1"})
    store.commit(txn)
    expected = store.dump()

    recovered = reopen(tmp_dir / "g")
    assert recovered.dump() == expected
    recovered.close()


def test_uncommitted_lost_on_reopen(tmp_dir):
    store = GraphStore(tmp_dir / "g")
    txn = store.begin()
    store.add_node(txn, "Patient", {"PatientID": "P1"})
    store.commit(txn)
    expected = store.dump()

    open_txn = store.begin()
    store.add_node(open_txn, "Patient", {"PatientID": "P2"})
    # no commit: crash now
    recovered = reopen(tmp_dir / "g")
    assert recovered.dump() == expected
    recovered.close()


def test_torn_log_tail_discards_unacked_commit(tmp_dir):
    store = GraphStore(tmp_dir / "g")
    txn = store.begin()
    store.add_node(txn, "Patient", {"PatientID": "P1"})
    store.commit(txn)
    after_first = store.dump()
    txn = store.begin()
    store.add_node(txn, "Patient", {"PatientID": "P2"})
    store.commit(txn)

    wal = tmp_dir / "g" / "graph.wal"
    data = wal.read_bytes()
    wal.write_bytes(data[:-3])  # the crash happened during the second append

    recovered = reopen(tmp_dir / "g")
    assert recovered.dump() == after_first
    recovered.close()


def test_corrupt_record_checksum_discards_tail(tmp_dir):
    store = GraphStore(tmp_dir / "g")
    txn = store.begin()
    store.add_node(txn, "P", {"v": 1})
    store.commit(txn)
    after_first = store.dump()
    txn = store.begin()
    store.add_node(txn, "P", {"v": 2})
    store.commit(txn)

    wal = tmp_dir / "g" / "graph.wal"
    data = bytearray(wal.read_bytes())
    data[-1] ^= 0xFF
    wal.write_bytes(bytes(data))

    recovered = reopen(tmp_dir / "g")
    assert recovered.dump() == after_first
    recovered.close()


def test_recovery_from_snapshot_plus_log(tmp_dir):
    store = GraphStore(tmp_dir / "g")
    for i in range(5):
        txn = store.begin()
        store.add_node(txn, "P", {"i": i})
        store.commit(txn)
    store.close()  # snapshot written, log truncated

    store = GraphStore(tmp_dir / "g")
    txn = store.begin()
    store.add_node(txn, "P", {"i": 99})
    store.commit(txn)
    expected = store.dump()  # snapshot + one log record

    recovered = reopen(tmp_dir / "g")
    assert recovered.dump() == expected
    assert len(recovered.dump()["nodes"]) == 6
    recovered.close()


def test_log_rollover_snapshot_threshold(tmp_dir):
    store = GraphStore(tmp_dir / "g", snapshot_wal_bytes=2048)
    for i in range(60):
        txn = store.begin()
        store.add_node(txn, "P", {"i": i, "pad": "x" * 50})
        store.commit(txn)
    expected = store.dump()
    assert (tmp_dir / "g" / "graph.wal").stat().st_size < 2048  # rolled over

    recovered = reopen(tmp_dir / "g")
    assert recovered.dump() == expected
    recovered.close()


def test_ids_not_reused_after_restart(tmp_dir):
    store = GraphStore(tmp_dir / "g")
    txn = store.begin()
    first = store.add_node(txn, "P", {})
    store.commit(txn)
    store.close()
    store = GraphStore(tmp_dir / "g")
    txn = store.begin()
    assert store.add_node(txn, "P", {}) == first + 1
    store.commit(txn)
    store.close()


KILL_CHILD = textwrap.dedent(
    """
    import sys
    from visor.graph import GraphStore

    store = GraphStore(sys.argv[1])
    txn = store.begin()
    store.add_node(txn, "Patient", {"PatientID": "committed"})
    store.commit(txn)

    txn = store.begin()
    for i in range(500):
        store.add_node(txn, "Junk", {"i": i})
    print("READY", flush=True)
    import time
    time.sleep(60)
    """
)


def test_sigkill_mid_transaction(tmp_dir):
    proc = subprocess.Popen(
        [sys.executable, "-c", KILL_CHILD, str(tmp_dir / "g")],
        stdout=subprocess.PIPE,
        text=True,
    )
    try:
        assert proc.stdout.readline().strip() == "READY"
        os.kill(proc.pid, signal.SIGKILL)
        proc.wait(timeout=10)
    finally:
        if proc.poll() is None:
            proc.kill()

    store = GraphStore(tmp_dir / "g")
    dump = store.dump()
    assert len(dump["nodes"]) == 1
    (record,) = dump["nodes"].values()
    assert record["properties"]["PatientID"] == "committed"
    store.close()


KILL_LOOP_CHILD = textwrap.dedent(
    """
    import sys
    from visor.graph import GraphStore

    store = GraphStore(sys.argv[1])
    for i in range(10000):
        txn = store.begin()
        store.add_node(txn, "P", {"seq": i})
        store.commit(txn)
        print(i, flush=True)
    """
)


def test_sigkill_during_commit_stream(tmp_dir):
    proc = subprocess.Popen(
        [sys.executable, "-c", KILL_LOOP_CHILD, str(tmp_dir / "g")],
        stdout=subprocess.PIPE,
        text=True,
    )
    acked = -1
    deadline = time.monotonic() + 20
    while time.monotonic() < deadline:
        line = proc.stdout.readline().strip()
        if line.isdigit():
            acked = int(line)
        if acked >= 25:
            break
    os.kill(proc.pid, signal.SIGKILL)
    proc.wait(timeout=10)

    store = GraphStore(tmp_dir / "g")
    seqs = sorted(
        rec["properties"]["seq"] for rec in store.dump()["nodes"].values()
    )
    store.close()
    # every acknowledged commit survived; anything beyond is a contiguous
    # prefix of commits that became durable before their ack was printed
    assert seqs == list(range(len(seqs)))
    assert len(seqs) >= acked + 1
