"""Interning, union adjacency, and triple-file parsing."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symkge.errors import EmptyDatasetError, MalformedTripleError, UnknownEntityError
from symkge.graph import (
    FORWARD,
    INVERSE,
    SignedRelation,
    intern_graph,
    load_dataset,
    read_triple_file,
    signed_neighbors,
)

from conftest import random_raw_triples


def test_single_triple_counts():
    graph, labels = intern_graph([("Bob", "play", "Basketball")])
    assert graph.entity_count == 2
    assert graph.relation_count == 1
    assert len(graph.triples) == 1
    assert graph.signed_edge_count == 2
    assert labels.entity_labels == ("Bob", "Basketball")


def test_duplicate_triples_removed():
    graph, _ = intern_graph([("a", "r", "b"), ("a", "r", "b")])
    assert len(graph.triples) == 1


def test_empty_dataset_rejected():
    with pytest.raises(EmptyDatasetError):
        intern_graph([])


def test_malformed_rows_rejected():
    with pytest.raises(MalformedTripleError):
        intern_graph([("a", "r")])  # type: ignore[list-item]
    with pytest.raises(MalformedTripleError):
        intern_graph([("a", "", "b")])


def test_signed_neighbors_forward_and_inverse():
    graph, labels = intern_graph([("Bob", "play", "Basketball")])
    bob = labels.entity_ids["Bob"]
    ball = labels.entity_ids["Basketball"]
    assert signed_neighbors(graph, bob) == ((SignedRelation(0, FORWARD), ball),)
    assert signed_neighbors(graph, ball) == ((SignedRelation(0, INVERSE), bob),)


def test_signed_neighbors_bad_id():
    graph, _ = intern_graph([("a", "r", "b")])
    with pytest.raises(UnknownEntityError):
        signed_neighbors(graph, 5)
    with pytest.raises(UnknownEntityError):
        signed_neighbors(graph, -1)


def test_every_forward_edge_has_inverse():
    rng = random.Random(7)
    graph, _ = intern_graph(random_raw_triples(rng, 20, 60, 5))
    edges = {
        (e, sr, nb) for e in range(graph.entity_count) for sr, nb in graph.out_index[e]
    }
    for e, sr, nb in edges:
        assert (nb, sr.flipped(), e) in edges


def test_union_neighbor_count_matches_triples():
    rng = random.Random(3)
    graph, _ = intern_graph(random_raw_triples(rng, 25, 80, 6))
    total = sum(len(signed_neighbors(graph, e)) for e in range(graph.entity_count))
    assert total == 2 * len(graph.triples)


def test_out_index_sorted():
    rng = random.Random(11)
    graph, _ = intern_graph(random_raw_triples(rng, 15, 70, 4))
    for e in range(graph.entity_count):
        entries = graph.out_index[e]
        assert list(entries) == sorted(entries)


@settings(max_examples=50, deadline=None)
@given(st.lists(
    st.tuples(st.text(min_size=1, max_size=4), st.text(min_size=1, max_size=3),
              st.text(min_size=1, max_size=4)),
    min_size=1, max_size=30,
))
def test_label_round_trip(raw):
    graph, labels = intern_graph(raw)
    for label, eid in labels.entity_ids.items():
        assert labels.entity_labels[eid] == label
    for label, rid in labels.relation_ids.items():
        assert labels.relation_labels[rid] == label
    assert set(labels.entity_ids.values()) == set(range(graph.entity_count))
    assert set(labels.relation_ids.values()) == set(range(graph.relation_count))


def test_interning_deterministic():
    rng = random.Random(5)
    raw = random_raw_triples(rng, 12, 40, 3)
    g1, l1 = intern_graph(raw)
    g2, l2 = intern_graph(list(raw))
    assert g1 == g2
    assert l1 == l2


def test_read_triple_file_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "train.tsv"
    path.write_text("# header\nBob\tplay\tBasketball\n\nJones\tplay\tBasketball\n",
                    encoding="utf-8")
    rows = read_triple_file(path)
    assert rows == [("Bob", "play", "Basketball"), ("Jones", "play", "Basketball")]


def test_read_triple_file_rejects_bad_rows(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("a\tb\n", encoding="utf-8")
    with pytest.raises(MalformedTripleError):
        read_triple_file(path)


def test_load_dataset_vocab_spans_all_splits(tmp_path):
    (tmp_path / "train.tsv").write_text("a\tr\tb\nb\tr\tc\n", encoding="utf-8")
    (tmp_path / "valid.tsv").write_text("a\tr\tc\n", encoding="utf-8")
    (tmp_path / "test.tsv").write_text("d\ts\ta\n", encoding="utf-8")
    ds = load_dataset(tmp_path / "train.tsv", tmp_path / "valid.tsv", tmp_path / "test.tsv")
    assert ds.graph.entity_count == 4  # a, b, c, d
    assert ds.graph.relation_count == 2
    assert len(ds.train) == 2
    assert len(ds.valid) == 1
    assert len(ds.test) == 1
    # train-only ids are not disturbed by the extra splits
    solo_graph, solo_labels = intern_graph(read_triple_file(tmp_path / "train.tsv"))
    assert ds.labels.entity_ids["a"] == solo_labels.entity_ids["a"]
    assert ds.labels.entity_ids["c"] == solo_labels.entity_ids["c"]
    assert solo_graph.triples == ds.graph.triples
    # test-only entity has no train edges
    assert ds.graph.out_index[ds.labels.entity_ids["d"]] == ()


def test_self_loop_kept():
    graph, _ = intern_graph([("a", "r", "a"), ("a", "r", "b")])
    assert len(graph.triples) == 2
    assert len(graph.out_index[0]) == 3  # loop contributes forward and inverse
