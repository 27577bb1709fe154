"""Transfer harness tests: probes, folds, embeddings, similarity, file I/O."""

import numpy as np
import pytest

from graphcontrast.contrast import ContrastConfig
from graphcontrast.downstream import (GRAPH_EMBED_CAP, GraphDataset, LabeledNodes,
                                      LinearHead, embed_graph, embed_nodes, graph_classify,
                                      hits_at_k, load_graph_set, load_labels, load_truth,
                                      logreg_fit, node_classify, save_graph_set,
                                      stratified_folds, top_k_similarity, whole_graph_view)
from graphcontrast.encoder import GinConfig
from graphcontrast.graphs import GraphDataError
from graphcontrast.sampling import RwrConfig
from graphcontrast.streams import RandomStreams
from graphcontrast.synthetic import (barbell_graph, cycle_graph, disjoint_union,
                                     star_graph, two_family_dataset)
from graphcontrast.training import PretrainConfig, random_checkpoint


def tiny_checkpoint(seed=0):
    cfg = PretrainConfig(
        rwr=RwrConfig(max_set_size=16, seed=seed),
        gin=GinConfig(num_layers=2, hidden_dim=16, out_dim=16,
                      positional_dim=8, degree_buckets=8, dropout=0.5),
        contrast=ContrastConfig(temperature=0.07, dictionary_size=8,
                                momentum=0.999, mechanism="moco"),
        batch_size=4, total_steps=10, warmup_steps=1, seed=seed)
    return random_checkpoint(cfg)


@pytest.fixture(scope="module")
def ckpt():
    return tiny_checkpoint()


@pytest.fixture(scope="module")
def roles_small():
    parts = [cycle_graph(8), cycle_graph(9), star_graph(5), star_graph(6)]
    graph = disjoint_union(parts)
    labels = np.array([0] * 17 + [1] * 13, dtype=np.int64)
    return LabeledNodes(graph=graph, vertices=np.arange(30), labels=labels)


def checkpoint_bytes(ckpt):
    parts = [ckpt.theta_q[k].tobytes() for k in sorted(ckpt.theta_q)]
    if ckpt.theta_k is not None:
        parts += [ckpt.theta_k[k].tobytes() for k in sorted(ckpt.theta_k)]
    return b"".join(parts)


def test_logreg_separable():
    x = np.array([[2.0, 0.1], [1.5, -0.2], [1.8, 0.0],
                  [-2.0, 0.3], [-1.7, -0.1], [-1.4, 0.2]])
    y = np.array([0, 0, 0, 1, 1, 1])
    head = logreg_fit(x, y)
    assert np.array_equal(head.predict(x), y)


def test_logreg_one_hot_multiclass():
    x = np.eye(4)[np.array([0, 1, 2, 3, 0, 1, 2, 3])]
    y = np.array([0, 1, 2, 3, 0, 1, 2, 3])
    head = logreg_fit(x, y, num_classes=4)
    assert np.array_equal(head.predict(np.eye(4)), np.arange(4))


def test_logreg_bias_handles_single_feature_shift():
    x = np.array([[5.0], [5.2], [4.8], [9.0], [9.2], [8.8]])
    y = np.array([0, 0, 0, 1, 1, 1])
    head = logreg_fit(x, y)
    assert np.array_equal(head.predict(x), y)


def test_logreg_validation():
    x = np.zeros((4, 2))
    with pytest.raises(ValueError):
        logreg_fit(x, np.zeros(3, dtype=np.int64))
    with pytest.raises(ValueError):
        logreg_fit(np.zeros(4), np.zeros(4, dtype=np.int64))
    with pytest.raises(ValueError):
        logreg_fit(x, np.array([0, 1, 2, 3]), num_classes=2)
    with pytest.raises(ValueError):
        logreg_fit(x, np.array([0, 1, 0, -1]))
    with pytest.raises(ValueError):
        logreg_fit(x, np.array([0, 1, 0, 1]), l2_penalty=-1.0)


def test_linear_head_predict_argmax():
    head = LinearHead(w=np.array([[1.0, -1.0], [0.0, 2.0]]), b=np.array([[0.0, 0.5]]))
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert np.array_equal(head.predict(x), np.array([0, 1]))


def test_stratified_folds_partition():
    labels = np.array([0] * 11 + [1] * 7 + [2] * 5)
    parts = stratified_folds(labels, 4, seed=3)
    sizes = [len(p) for p in parts]
    assert max(sizes) - min(sizes) <= 1
    merged = np.sort(np.concatenate(parts))
    assert np.array_equal(merged, np.arange(len(labels)))
    for cls in (0, 1, 2):
        counts = [int(np.sum(labels[p] == cls)) for p in parts]
        assert max(counts) - min(counts) <= 1


def test_stratified_folds_deterministic_per_seed():
    labels = np.array([0, 1] * 10)
    a = stratified_folds(labels, 5, seed=2)
    b = stratified_folds(labels, 5, seed=2)
    c = stratified_folds(labels, 5, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))


def test_stratified_folds_validation():
    labels = np.array([0, 1, 0, 1])
    with pytest.raises(ValueError):
        stratified_folds(labels, 1)
    with pytest.raises(ValueError):
        stratified_folds(labels, 5)


def test_labeled_nodes_validation():
    g = cycle_graph(4)
    with pytest.raises(ValueError):
        LabeledNodes(graph=g, vertices=np.arange(3), labels=np.zeros(2, dtype=np.int64))
    with pytest.raises(ValueError):
        LabeledNodes(graph=g, vertices=np.arange(0), labels=np.zeros(0, dtype=np.int64))
    with pytest.raises(ValueError):
        GraphDataset(graphs=[], labels=np.zeros(0, dtype=np.int64))


def test_embed_nodes_unit_norm_and_deterministic(ckpt):
    g = barbell_graph(4, 2)
    emb1 = embed_nodes(ckpt, g)
    emb2 = embed_nodes(ckpt, g)
    assert emb1.shape == (g.num_vertices, ckpt.config.gin.out_dim)
    assert np.array_equal(emb1, emb2)
    assert np.abs(np.linalg.norm(emb1, axis=1) - 1.0).max() < 1e-12


def test_embed_nodes_rows_independent_of_request_set(ckpt):
    g = barbell_graph(4, 2)
    full = embed_nodes(ckpt, g)
    subset = embed_nodes(ckpt, g, vertices=np.array([3, 7]))
    assert np.array_equal(subset, full[[3, 7]])


def test_embed_nodes_validation(ckpt):
    g = cycle_graph(5)
    with pytest.raises(ValueError):
        embed_nodes(ckpt, g, vertices=np.array([], dtype=np.int64))
    with pytest.raises(ValueError):
        embed_nodes(ckpt, g, vertices=np.array([5]))
    with pytest.raises(ValueError):
        embed_nodes(ckpt, g, vertices=np.array([-1]))


def test_whole_graph_view_ego_and_cap():
    g = star_graph(4)
    view = whole_graph_view(g)
    assert view.graph.num_vertices == 5
    assert view.ego == 0
    with pytest.raises(ValueError):
        whole_graph_view(cycle_graph(GRAPH_EMBED_CAP + 1))


def test_embed_graph_unit_norm_deterministic(ckpt):
    g = cycle_graph(9)
    e1 = embed_graph(ckpt, g)
    e2 = embed_graph(ckpt, g)
    assert e1.shape == (ckpt.config.gin.out_dim,)
    assert np.array_equal(e1, e2)
    assert abs(np.linalg.norm(e1) - 1.0) < 1e-12


def test_node_classify_freeze_learns_cycles_vs_stars(ckpt, roles_small):
    mean, accs = node_classify(ckpt, roles_small, mode="freeze", folds=3, seed=5)
    assert len(accs) == 3
    assert mean == pytest.approx(float(np.mean(accs)))
    assert mean > 2 / 3  # above the majority-class rate 17/30


def test_node_classify_freeze_deterministic(ckpt, roles_small):
    a = node_classify(ckpt, roles_small, mode="freeze", folds=3, seed=5)
    b = node_classify(ckpt, roles_small, mode="freeze", folds=3, seed=5)
    assert a == b


def test_node_classify_freeze_leaves_checkpoint_untouched(ckpt, roles_small):
    before = checkpoint_bytes(ckpt)
    node_classify(ckpt, roles_small, mode="freeze", folds=3, seed=5)
    assert checkpoint_bytes(ckpt) == before


def test_node_classify_full_finetunes_without_mutating_checkpoint(ckpt, roles_small):
    before = checkpoint_bytes(ckpt)
    mean, accs = node_classify(ckpt, roles_small, mode="full", folds=2, seed=5,
                               epochs=4, batch_size=8, peak_lr=0.01)
    assert checkpoint_bytes(ckpt) == before
    assert len(accs) == 2
    assert all(0.0 <= a <= 1.0 for a in accs)
    assert np.isfinite(mean)


def test_node_classify_full_needs_warmup_epochs(ckpt, roles_small):
    with pytest.raises(ValueError):
        node_classify(ckpt, roles_small, mode="full", folds=2, epochs=3)


def test_classify_mode_and_label_validation(ckpt, roles_small):
    with pytest.raises(ValueError):
        node_classify(ckpt, roles_small, mode="thaw")
    single = LabeledNodes(graph=roles_small.graph, vertices=np.arange(10),
                          labels=np.zeros(10, dtype=np.int64))
    with pytest.raises(ValueError):
        node_classify(ckpt, single, mode="freeze", folds=2)


def test_graph_classify_freeze_separates_families(ckpt):
    graphs, labels = two_family_dataset(per_class=8, seed=3)
    mean, accs = graph_classify(ckpt, GraphDataset(graphs=graphs, labels=labels),
                                mode="freeze", folds=4, seed=1)
    assert len(accs) == 4
    assert mean == pytest.approx(1.0)


def test_hits_at_k_identity_embeddings():
    emb = np.eye(6)
    truth = [(i, i) for i in range(6)]
    assert hits_at_k(emb, emb, truth, k=1) == 1.0


def test_hits_at_k_rank_counting():
    # candidate scores for query 0 are 0.9, 0.8, ..., descending by id
    query = np.array([[1.0, 0.0]])
    cand = np.stack([np.linspace(0.9, 0.1, 9), np.zeros(9)], axis=1)
    assert hits_at_k(query, cand, [(0, 4)], k=4) == 0.0
    assert hits_at_k(query, cand, [(0, 4)], k=5) == 1.0
    assert hits_at_k(query, cand, [(0, 4)], k=9) == 1.0


def test_hits_at_k_monotone_in_k():
    gen = RandomStreams(0, "hits").generator()
    q = gen.normal(size=(8, 5))
    c = gen.normal(size=(8, 5))
    truth = [(i, i) for i in range(8)]
    vals = [hits_at_k(q, c, truth, k) for k in range(1, 9)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == 1.0


def test_hits_at_k_ties_rank_by_ascending_id():
    emb = np.ones((4, 3)) / np.sqrt(3)
    assert hits_at_k(emb, emb, [(2, 0)], k=1) == 1.0
    assert hits_at_k(emb, emb, [(2, 3)], k=3) == 0.0
    assert hits_at_k(emb, emb, [(2, 3)], k=4) == 1.0


def test_hits_at_k_validation():
    emb = np.eye(3)
    with pytest.raises(ValueError):
        hits_at_k(emb, emb, [(0, 0)], k=0)
    with pytest.raises(ValueError):
        hits_at_k(emb, emb, [], k=1)


def test_top_k_similarity_same_graph_top1(ckpt):
    # identical inputs give each query a dot product of exactly 1 with
    # its own counterpart; misses can only come from exact ties
    g = barbell_graph(4, 2)
    truth = [(v, v) for v in range(g.num_vertices)]
    score = top_k_similarity(ckpt, g, g, truth, k=1)
    assert score >= 0.5
    assert top_k_similarity(ckpt, g, g, truth, k=g.num_vertices) == 1.0


def test_top_k_similarity_validates_truth(ckpt):
    g = cycle_graph(5)
    with pytest.raises(ValueError):
        top_k_similarity(ckpt, g, g, [], k=1)
    with pytest.raises(ValueError):
        top_k_similarity(ckpt, g, g, [(5, 0)], k=1)
    with pytest.raises(ValueError):
        top_k_similarity(ckpt, g, g, [(0, 5)], k=1)


def test_load_labels_roundtrip(tmp_path):
    g = cycle_graph(6)
    path = tmp_path / "labels.txt"
    path.write_text("# header comment\n0 1\n2 0   # trailing comment\n\n5 2\n")
    data = load_labels(path, g)
    assert np.array_equal(data.vertices, np.array([0, 2, 5]))
    assert np.array_equal(data.labels, np.array([1, 0, 2]))


@pytest.mark.parametrize("text", [
    "0 1 2\n", "zero 1\n", "9 1\n", "0 -1\n", "# only a comment\n",
])
def test_load_labels_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(GraphDataError):
        load_labels(path, cycle_graph(6))


def test_load_truth_parses_pairs(tmp_path):
    path = tmp_path / "truth.txt"
    path.write_text("0 3\n# note\n2 2\n")
    assert load_truth(path) == [(0, 3), (2, 2)]
    bad = tmp_path / "bad.txt"
    bad.write_text("1 two\n")
    with pytest.raises(GraphDataError):
        load_truth(bad)


def test_graph_set_roundtrip(tmp_path):
    graphs, labels = two_family_dataset(per_class=3, seed=7)
    path = tmp_path / "set.txt"
    save_graph_set(path, graphs, labels)
    loaded = load_graph_set(path)
    assert np.array_equal(loaded.labels, labels)
    assert len(loaded.graphs) == len(graphs)
    for orig, back in zip(graphs, loaded.graphs):
        assert back.num_vertices == orig.num_vertices
        assert np.array_equal(back.edge_array(), orig.edge_array())


@pytest.mark.parametrize("text", [
    "g 0 1 3\n0 1\n",                   # header missing a field
    "h 0 1 3 1\n0 1\n",                 # wrong record tag
    "g 0 x 3 1\n0 1\n",                 # non-integer class
    "g 0 1 3 2\n0 1\n",                 # truncated edge list
    "g 0 1 3 1\n0 3\n",                 # endpoint outside vertex range
    "g 0 1 3 1\n0\n",                   # malformed edge line
    "g 0 1 0 0\n",                      # empty graph record
    "",                                 # no records at all
])
def test_load_graph_set_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(GraphDataError):
        load_graph_set(path)
