import numpy as np
import pytest

from rrergm import (
    Graph,
    GraphFormatError,
    dyad_count,
    dyad_endpoints,
    dyad_index,
    hamming_distance,
    load_attributes,
    load_edge_list,
    write_edge_list,
)

import reference as ref
from helpers import from_dense, to_dense


def test_dyad_count():
    assert dyad_count(5, directed=False) == 10
    assert dyad_count(5, directed=True) == 20
    assert dyad_count(1, directed=False) == 0


@pytest.mark.parametrize("directed", [False, True])
def test_dyad_enumeration_round_trip(directed):
    n = 7
    i_arr, j_arr = dyad_endpoints(n, directed)
    assert len(i_arr) == dyad_count(n, directed)
    seen = set()
    for d in range(len(i_arr)):
        i, j = int(i_arr[d]), int(j_arr[d])
        assert i != j
        if not directed:
            assert i < j
        assert dyad_index(n, directed, i, j) == d
        seen.add((i, j))
    assert len(seen) == len(i_arr)


def test_undirected_dyad_index_symmetric():
    assert dyad_index(5, False, 3, 1) == dyad_index(5, False, 1, 3)


def test_from_edges_and_dense_round_trip(rng):
    for directed in (False, True):
        a = ref.random_graph(rng, 6, directed)
        g = from_dense(a, directed)
        assert np.array_equal(to_dense(g), a)
        g2 = Graph.from_edges(6, g.edges(), directed)
        assert g2 == g


def test_toggle_is_an_involution(toy_graph):
    g = toy_graph.toggle_dyad(0, 3)
    assert g.get(0, 3) and not toy_graph.get(0, 3)
    assert g.toggle_dyad(0, 3) == toy_graph


def test_toggle_orientation_ignored_when_undirected():
    g = Graph.empty(3)
    assert g.toggle_dyad(2, 1) == g.toggle_dyad(1, 2)
    assert g.toggle_dyad(1, 2).edge_count == 1


def test_copy_on_write_leaves_original_alone(toy_graph):
    before = toy_graph.edge_count
    toy_graph.toggle_dyad(0, 5)
    assert toy_graph.edge_count == before


def test_hamming_distance():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    assert hamming_distance(g, g) == 0
    assert hamming_distance(g, g.toggle_dyad(1, 2)) == 1
    empty = Graph.empty(4)
    complete = Graph.from_edges(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    assert hamming_distance(empty, complete) == 6


def test_degrees_and_density():
    g = Graph.from_edges(4, [(0, 1), (1, 2)])
    assert list(g.degrees()) == [1, 2, 1, 0]
    assert g.density() == pytest.approx(2 / 6)
    d = Graph.from_edges(3, [(0, 1), (2, 1)], directed=True)
    assert list(d.degrees()) == [0, 2, 0]


def test_load_edge_list_basic(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("# comment\n1 2\n2 3\n\n")
    g = load_edge_list(path, 3, directed=False)
    assert g.edge_count == 2
    assert g.get(0, 1) and g.get(1, 2) and not g.get(0, 2)


def test_load_edge_list_duplicates_collapse(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("1 2\n1 2\n")
    assert load_edge_list(path, 3, directed=False).edge_count == 1


@pytest.mark.parametrize(
    "content,fragment",
    [
        ("1 1\n", "self-loop"),
        ("1 9\n", "out of range"),
        ("1\n", ":1:"),
        ("a b\n", ":1:"),
    ],
)
def test_load_edge_list_errors(tmp_path, content, fragment):
    path = tmp_path / "bad.edges"
    path.write_text(content)
    with pytest.raises(GraphFormatError, match=fragment):
        load_edge_list(path, 3, directed=False)


@pytest.mark.parametrize("directed", [False, True])
def test_edge_list_round_trip(tmp_path, rng, directed):
    a = ref.random_graph(rng, 8, directed)
    g = from_dense(a, directed)
    path = tmp_path / "g.edges"
    write_edge_list(g, path)
    assert load_edge_list(path, 8, directed) == g
    # canonical order and 1-based labels on disk
    lines = [ln for ln in path.read_text().splitlines() if ln]
    pairs = [tuple(int(t) for t in ln.split()) for ln in lines]
    assert pairs == sorted(pairs)
    assert all(1 <= i <= 8 and 1 <= j <= 8 for i, j in pairs)


def test_load_attributes(tmp_path):
    path = tmp_path / "attrs.csv"
    path.write_text("gender:cat,seniority:num\nM,1\nF,2.5\nM,3\n")
    attrs = load_attributes(path, 3)
    assert attrs.n == 3
    assert attrs.cat("gender").levels == ("M", "F")
    assert list(attrs.cat("gender").codes) == [0, 1, 0]
    assert list(attrs.num("seniority").values) == [1.0, 2.5, 3.0]


def test_load_attributes_row_count_mismatch(tmp_path):
    path = tmp_path / "attrs.csv"
    path.write_text("gender:cat\nM\nF\n")
    with pytest.raises(GraphFormatError, match="2"):
        load_attributes(path, 3)


def test_load_attributes_rejects_missing_values(tmp_path):
    path = tmp_path / "attrs.csv"
    path.write_text("gender:cat,age:num\nM,\nF,2\nM,3\n")
    with pytest.raises(GraphFormatError):
        load_attributes(path, 3)


def test_categorical_levels_keep_first_appearance_order(tmp_path):
    path = tmp_path / "attrs.csv"
    path.write_text("dept:cat\nLegal\nTrading\nLegal\nOther\n")
    attrs = load_attributes(path, 4)
    assert attrs.cat("dept").levels == ("Legal", "Trading", "Other")
