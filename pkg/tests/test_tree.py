import numpy as np
import pytest

from semloc import (CombinedScoreParams, FovMask, LayoutDescriptor,
                    PoolingLayout, build_tree, min_rotation_distance,
                    pairwise_distance_matrix, rank_tiles, spectral_split,
                    tree_search)
from semloc.errors import ParameterError
from semloc.tree import DegenerateSplitError, TraversalBudget

LAYOUT = PoolingLayout.default()
FULL = FovMask.full(LAYOUT)


def ld(values):
    values = np.asarray(values, dtype=float)
    return LayoutDescriptor(values, np.ones(values.shape[0], dtype=np.uint8),
                            np.zeros(2), 0.0)


def nested_descriptors(seed, depth=3, fan=3, ratio=0.35, n_concepts=3):
    """3^depth descriptors arranged as nested clusters, coarse to fine."""
    rng = np.random.default_rng(seed)
    vals = [np.zeros((n_concepts, 1, 8))]
    for level in range(depth):
        scale = ratio ** level
        vals = [v + rng.normal(scale=scale, size=v.shape)
                for v in vals for _ in range(fan)]
    return [ld(v) for v in vals], rng


def test_pairwise_matrix_matches_scan(rng):
    descs = [ld(rng.normal(size=(2, 1, 8))) for _ in range(10)]
    mat = pairwise_distance_matrix(descs)
    assert mat.shape == (10, 10)
    np.testing.assert_allclose(mat, mat.T, atol=1e-9)
    np.testing.assert_allclose(np.diag(mat), 0.0, atol=1e-12)
    for i in range(10):
        for j in range(10):
            d, _ = min_rotation_distance(descs[i], descs[j], FULL)
            assert mat[i, j] == pytest.approx(d, abs=1e-9)


def test_spectral_split_recovers_planted_blocks():
    # three groups of five with tiny internal and large external distances
    n, g = 15, 5
    dist = np.full((n, n), 6.0)
    for b in range(3):
        sl = slice(b * g, (b + 1) * g)
        dist[sl, sl] = 0.1
    np.fill_diagonal(dist, 0.0)
    labels = spectral_split(dist, 3, seed=0)
    for b in range(3):
        block = labels[b * g:(b + 1) * g]
        assert len(set(block)) == 1
    assert set(labels) == {0, 1, 2}


def test_spectral_split_edge_cases():
    with pytest.raises(ParameterError):
        spectral_split(np.zeros((4, 4)), 1, seed=0)
    with pytest.raises(DegenerateSplitError):
        spectral_split(np.zeros((2, 2)), 3, seed=0)
    # n == k: every tile becomes its own cluster
    labels = spectral_split(np.ones((3, 3)) - np.eye(3), 3, seed=0)
    assert sorted(labels) == [0, 1, 2]
    # all-equal distances still yield three nonempty clusters
    labels = spectral_split(np.ones((9, 9)) - np.eye(9), 3, seed=0)
    assert set(labels) == {0, 1, 2}


def test_build_tree_structure():
    descs, _ = nested_descriptors(0)
    entries = list(enumerate(descs))
    tree = build_tree(entries, branching=3, leaf_capacity=3, seed=0)
    assert tree.root.id == 0
    assert sorted(tree.root.tile_ids) == list(range(27))
    assert [n.id for n in tree.nodes] == list(range(len(tree.nodes)))
    layers = [n.layer for n in tree.nodes]
    assert layers == sorted(layers)                  # breadth-first ids
    for node in tree.nodes:
        if node.is_leaf:
            assert (len(node.tile_ids) <= tree.leaf_capacity
                    or len(node.tile_ids) < tree.branching)
        else:
            child_ids = [t for c in node.children
                         for t in tree.nodes[c].tile_ids]
            assert sorted(child_ids) == sorted(node.tile_ids)
            assert all(tree.nodes[c].parent == node.id for c in node.children)
            assert all(tree.nodes[c].tile_ids for c in node.children)


def test_build_tree_deterministic_and_accepts_precomputed():
    descs, _ = nested_descriptors(1)
    entries = list(enumerate(descs))
    t1 = build_tree(entries, 3, 3, seed=5)
    t2 = build_tree(entries, 3, 3, seed=5)
    assert [n.tile_ids for n in t1.nodes] == [n.tile_ids for n in t2.nodes]
    pre = pairwise_distance_matrix(descs)
    t3 = build_tree(entries, 3, 3, seed=5, distances=pre)
    assert [n.tile_ids for n in t3.nodes] == [n.tile_ids for n in t1.nodes]


def test_build_tree_small_and_invalid_inputs(rng):
    one = [(0, ld(rng.normal(size=(1, 1, 8))))]
    assert build_tree(one, 3, 8, 0).root.is_leaf
    with pytest.raises(ParameterError):
        build_tree(one, branching=1)
    with pytest.raises(ParameterError):
        build_tree(one, leaf_capacity=0)
    with pytest.raises(ParameterError):
        build_tree([])


def test_tree_search_finds_exhaustive_best_on_nested_data():
    descs, rng = nested_descriptors(2)
    entries = list(enumerate(descs))
    tree = build_tree(entries, 3, 3, seed=0)
    hits = 0
    for trial in range(20):
        src = int(rng.integers(27))
        qv = descs[src].values + rng.normal(scale=0.003, size=(3, 1, 8))
        q = ld(qv)
        exhaustive, _ = rank_tiles(q, entries, FULL)
        best, comparisons = tree_search(tree, dict(entries), q, FULL,
                                        budget=TraversalBudget(5, trial, 1))
        assert comparisons <= 27
        hits += best.tile_id == exhaustive[0].tile_id
    assert hits >= 18


def test_tree_search_budget_and_determinism():
    descs, rng = nested_descriptors(3)
    entries = list(enumerate(descs))
    tree = build_tree(entries, 3, 3, seed=1)
    q = ld(descs[5].values + rng.normal(scale=0.003, size=(3, 1, 8)))
    budget = TraversalBudget(samples_per_child=2, seed=9, spill=1)
    b1, c1 = tree_search(tree, dict(entries), q, FULL, budget=budget)
    b2, c2 = tree_search(tree, dict(entries), q, FULL, budget=budget)
    assert (b1.tile_id, b1.distance, c1) == (b2.tile_id, b2.distance, c2)
    # two sampling levels of at most 2 x 3 scores plus one leaf of 3
    assert c1 <= 2 * 3 * 2 + 3
    wide, cw = tree_search(tree, dict(entries), q, FULL,
                           budget=TraversalBudget(2, 9, spill=3))
    assert cw >= c1
    assert wide.distance <= b1.distance + 1e-12


def test_tree_search_respects_combined_params():
    descs, _ = nested_descriptors(4, n_concepts=2)
    entries = list(enumerate(descs))
    tree = build_tree(entries, 3, 3, seed=2)
    q = LayoutDescriptor(descs[0].values, np.array([1, 0], dtype=np.uint8),
                         np.zeros(2), 0.0)
    params = CombinedScoreParams(lambda_=5.0, asymmetric=False)
    best, _ = tree_search(tree, dict(entries), q, FULL, params,
                          TraversalBudget(27, 0, 3))
    exhaustive, _ = rank_tiles(q, entries, FULL, params)
    assert best.tile_id == exhaustive[0].tile_id
    assert best.distance == pytest.approx(exhaustive[0].distance, abs=1e-9)


def test_traversal_budget_validation():
    with pytest.raises(ParameterError):
        TraversalBudget(samples_per_child=0)
    with pytest.raises(ParameterError):
        TraversalBudget(spill=0)
