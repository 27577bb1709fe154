import numpy as np
import pytest

from graphcontrast.graphs import (
    Graph,
    GraphDataError,
    from_edge_array,
    induced_subgraph,
    load_edge_list,
    r_ego_network,
)
from graphcontrast.synthetic import cycle_graph, grid_graph, star_graph


def test_from_edge_array_basic():
    g = from_edge_array(np.array([[0, 1], [1, 2], [2, 0]]))
    assert g.num_vertices == 3
    assert g.num_edges == 3
    assert np.array_equal(g.degrees(), [2, 2, 2])
    assert g.has_edge(0, 2) and g.has_edge(2, 0)
    assert not g.has_edge(0, 0)


def test_from_edge_array_dedups_and_drops_self_loops():
    edges = np.array([[0, 1], [1, 0], [0, 1], [2, 2], [1, 2]])
    g = from_edge_array(edges)
    assert g.num_edges == 2
    assert np.array_equal(g.neighbors_of(1), [0, 2])


def test_neighbors_sorted_and_immutable():
    g = from_edge_array(np.array([[3, 0], [3, 2], [3, 1]]))
    assert np.array_equal(g.neighbors_of(3), [0, 1, 2])
    with pytest.raises(ValueError):
        g.neighbors[0] = 7


def test_isolated_vertices_allowed():
    g = from_edge_array(np.array([[0, 1]]), num_vertices=4)
    assert g.num_vertices == 4
    assert g.degree(2) == 0
    assert len(g.neighbors_of(3)) == 0


def test_edge_array_roundtrip():
    rng = np.random.default_rng(0)
    edges = rng.integers(0, 20, size=(60, 2))
    g = from_edge_array(edges)
    again = from_edge_array(g.edge_array(), num_vertices=g.num_vertices)
    assert np.array_equal(g.offsets, again.offsets)
    assert np.array_equal(g.neighbors, again.neighbors)


def test_validate_rejects_asymmetric_adjacency():
    g = from_edge_array(np.array([[0, 1], [1, 2]]))
    broken = Graph(offsets=g.offsets.copy(),
                   neighbors=np.array([1, 0, 2, 0], dtype=np.int64))
    with pytest.raises(GraphDataError):
        broken.validate()


def test_induced_subgraph_keeps_internal_edges_only():
    g = cycle_graph(6)
    sub = induced_subgraph(g, np.array([0, 1, 2, 4]))
    assert np.array_equal(sub.origin, [0, 1, 2, 4])
    assert sub.graph.num_edges == 2  # 0-1 and 1-2; vertex 4 is stranded
    assert sub.graph.has_edge(0, 1) and sub.graph.has_edge(1, 2)


def test_induced_subgraph_rejects_out_of_range():
    g = cycle_graph(5)
    with pytest.raises(ValueError):
        induced_subgraph(g, np.array([0, 9]))


def test_r_ego_network_radius():
    g = cycle_graph(10)
    assert np.array_equal(r_ego_network(g, 0, 1).origin, [0, 1, 9])
    assert np.array_equal(r_ego_network(g, 0, 2).origin, [0, 1, 2, 8, 9])
    assert len(r_ego_network(g, 0, 5).origin) == 10  # full cycle at the diameter


def test_r_ego_network_star_center_vs_leaf():
    g = star_graph(6)
    assert len(r_ego_network(g, 0, 1).origin) == 7
    assert np.array_equal(r_ego_network(g, 3, 1).origin, [0, 3])
    assert len(r_ego_network(g, 3, 2).origin) == 7


def test_load_edge_list(tmp_path):
    p = tmp_path / "edges.txt"
    p.write_text("# a comment\n0 1\n1 2\n\n2 0\n")
    g = load_edge_list(p)
    assert g.num_vertices == 3
    assert g.num_edges == 3


def test_load_edge_list_reports_line_numbers(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0 1\nnot an edge\n")
    with pytest.raises(GraphDataError, match="line 2"):
        load_edge_list(p)


def test_load_edge_list_rejects_empty(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("# nothing\n")
    with pytest.raises(GraphDataError):
        load_edge_list(p)


def test_grid_graph_shape():
    g = grid_graph(3, 4)
    assert g.num_vertices == 12
    assert g.num_edges == 3 * 3 + 2 * 4  # horizontal + vertical runs
    degs = np.sort(g.degrees())
    assert degs[0] == 2 and degs[-1] == 4
