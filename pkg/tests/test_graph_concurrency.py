from __future__ import annotations

import threading

import pytest

from visor.errors import TransactionConflictError, TransactionStateError


def test_concurrent_read_only_txns_see_identical_snapshots(graph, three_patients):
    a = graph.begin("read-only")
    b = graph.begin("read-only")
    assert graph.dump(a) == graph.dump(b)
    graph.abort(a)
    graph.abort(b)


def test_reader_isolated_from_committers(graph, three_patients):
    reader = graph.begin("read-only")
    first = graph.find_nodes(reader, "Patient", [("Age", ">=", 85)])
    writer = graph.begin()
    graph.add_node(writer, "Patient", {"PatientID": "P4", "Age": 99})
    graph.commit(writer)
    again = graph.find_nodes(reader, "Patient", [("Age", ">=", 85)])
    assert [n.node_id for n in first] == [n.node_id for n in again]
    graph.abort(reader)
    fresh = graph.begin("read-only")
    assert len(graph.find_nodes(fresh, "Patient", [("Age", ">=", 85)])) == 3
    graph.abort(fresh)


def test_uncommitted_writes_invisible_to_others(graph):
    writer = graph.begin()
    graph.add_node(writer, "Patient", {"PatientID": "X"})
    other = graph.begin("read-only")
    assert graph.find_nodes(other, "Patient") == []
    graph.abort(other)
    graph.commit(writer)


def test_write_write_conflict_exactly_one_succeeds(graph):
    txn = graph.begin()
    node = graph.add_node(txn, "Patient", {"Age": 50})
    graph.commit(txn)

    barrier = threading.Barrier(2)
    outcomes = []

    def contender(value):
        t = graph.begin()
        graph.set_property(t, node, "Age", value)
        barrier.wait()
        try:
            graph.commit(t)
            outcomes.append(("ok", value))
        except TransactionConflictError:
            outcomes.append(("conflict", value))

    threads = [threading.Thread(target=contender, args=(v,)) for v in (60, 70)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert sorted(kind for kind, _ in outcomes) == ["conflict", "ok"]
    winner = next(v for kind, v in outcomes if kind == "ok")
    check = graph.begin("read-only")
    assert graph.get_node(check, node).properties["Age"] == winner
    graph.abort(check)


def test_disjoint_writers_both_commit(graph):
    txn = graph.begin()
    a = graph.add_node(txn, "P", {"v": 1})
    b = graph.add_node(txn, "P", {"v": 1})
    graph.commit(txn)

    t1 = graph.begin()
    t2 = graph.begin()
    graph.set_property(t1, a, "v", 2)
    graph.set_property(t2, b, "v", 3)
    graph.commit(t1)
    graph.commit(t2)
    check = graph.begin("read-only")
    assert graph.get_node(check, a).properties["v"] == 2
    assert graph.get_node(check, b).properties["v"] == 3
    graph.abort(check)


def test_failed_commit_finalizes_the_transaction(graph):
    txn = graph.begin()
    node = graph.add_node(txn, "P", {"v": 1})
    graph.commit(txn)

    loser = graph.begin()
    winner = graph.begin()
    graph.set_property(loser, node, "v", 2)
    graph.set_property(winner, node, "v", 3)
    graph.commit(winner)
    with pytest.raises(TransactionConflictError):
        graph.commit(loser)
    # the handle is rolled back, not left dangling half-open
    with pytest.raises(TransactionStateError):
        graph.commit(loser)
    with pytest.raises(TransactionStateError):
        graph.set_property(loser, node, "v", 4)
    assert graph._active == {}


def test_delete_conflicts_with_concurrent_property_write(graph):
    txn = graph.begin()
    node = graph.add_node(txn, "P", {"v": 1})
    graph.commit(txn)

    t1 = graph.begin()
    t2 = graph.begin()
    graph.set_property(t1, node, "v", 2)
    graph.delete_node(t2, node)
    graph.commit(t1)
    with pytest.raises(TransactionConflictError):
        graph.commit(t2)


def test_edge_to_concurrently_deleted_node_conflicts(graph):
    txn = graph.begin()
    a = graph.add_node(txn, "P", {})
    b = graph.add_node(txn, "P", {})
    graph.commit(txn)

    t1 = graph.begin()
    t2 = graph.begin()
    graph.delete_node(t1, b)
    graph.add_edge(t2, "E", a, b, {})
    graph.commit(t1)
    with pytest.raises(TransactionConflictError):
        graph.commit(t2)


def test_open_reader_never_blocks_writer(graph):
    reader = graph.begin("read-only")
    done = threading.Event()

    def writer():
        t = graph.begin()
        graph.add_node(t, "P", {})
        graph.commit(t)
        done.set()

    thread = threading.Thread(target=writer)
    thread.start()
    thread.join(timeout=5)
    assert done.is_set(), "writer stalled behind an open read transaction"
    graph.abort(reader)


def test_many_parallel_readers_during_writes(graph, three_patients):
    stop = threading.Event()
    errors = []

    def reader():
        while not stop.is_set():
            t = graph.begin("read-only")
            found = graph.find_nodes(t, "Patient", [("Age", ">=", 85)])
            # every snapshot is internally consistent: count matches re-read
            if len(found) != len(graph.find_nodes(t, "Patient", [("Age", ">=", 85)])):
                errors.append("inconsistent snapshot")
            graph.abort(t)

    threads = [threading.Thread(target=reader) for _ in range(4)]
    for t in threads:
        t.start()
    for i in range(30):
        w = graph.begin()
        graph.add_node(w, "Patient", {"PatientID": f"N{i}", "Age": 85 + i})
        graph.commit(w)
    stop.set()
    for t in threads:
        t.join()
    assert errors == []
