"""Hierarchical spectral index over tile descriptors.

Tiles are clustered recursively: a Gaussian affinity is built from the
rotation-searched descriptor distances, the symmetric normalized Laplacian
is eigendecomposed, rows are embedded into the nontrivial smallest
eigenvectors, and seeded Lloyd iterations with restarts label the rows.
Search descends the hierarchy by scoring a small random sample per child
and taking the most promising branch, then scans the reached leaf
exhaustively; the work per query is bounded by samples-per-child times
branching times depth plus the leaf size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._util import parallel_map, worker_count
from .descriptor import LayoutDescriptor
from .errors import ParameterError
from .matching import CombinedScoreParams, FovMask, MatchResult, _profile_many, \
    presence_mismatch

KMEANS_RESTARTS = 50
KMEANS_MAX_ITER = 200


class DegenerateSplitError(ParameterError):
    """Fewer points than requested clusters; the caller should make a leaf."""


@dataclass
class TreeNode:
    id: int
    layer: int
    parent: int                       # -1 for the root
    tile_ids: list[int]
    children: list[int] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class SemanticTree:
    nodes: list[TreeNode]
    branching: int
    leaf_capacity: int
    seed: int

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    @property
    def depth(self) -> int:
        return max(n.layer for n in self.nodes)

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.is_leaf]


@dataclass
class TraversalBudget:
    """Per-query search budget: tiles sampled per child, RNG seed, spill width."""

    samples_per_child: int = 5
    seed: int = 0
    spill: int = 1

    def __post_init__(self):
        if self.samples_per_child < 1:
            raise ParameterError("need at least one sample per child")
        if self.spill < 1:
            raise ParameterError("spill width must be at least 1")


def pairwise_distance_matrix(descs: list[LayoutDescriptor],
                             mask: FovMask | None = None,
                             chunk: int = 128) -> np.ndarray:
    """Min-rotation distances between all descriptor pairs (layout term only).

    With the default full mask the matrix is symmetric because a shift of
    one argument is the inverse shift of the other.
    """
    n = len(descs)
    if n == 0:
        return np.zeros((0, 0))
    values = np.stack([d.values for d in descs])
    weights = np.ones(values.shape[2:]) if mask is None else mask.weights
    out = np.empty((n, n))

    def run_rows(lo: int) -> None:
        hi = min(lo + chunk, n)
        for i in range(lo, hi):
            d2 = _profile_many(values[i], values, weights)
            out[i] = np.sqrt(d2.min(axis=1))

    parallel_map(run_rows, range(0, n, chunk), workers=worker_count())
    np.fill_diagonal(out, 0.0)
    return out


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    n = len(points)
    centers = points[rng.choice(n, size=k, replace=False)].copy()
    labels = np.full(n, -1)
    for _ in range(KMEANS_MAX_ITER):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                # revive an empty cluster with the worst-fit point
                worst = int(np.argmax(d2[np.arange(n), new_labels]))
                new_labels[worst] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            centers[c] = points[labels == c].mean(axis=0)
    d2 = ((points - centers[labels]) ** 2).sum()
    return labels, float(d2)


def _lloyd_best(points: np.ndarray, k: int, seed: int,
                restarts: int = KMEANS_RESTARTS) -> np.ndarray:
    best_labels, best_inertia = None, math.inf
    for child in np.random.SeedSequence(seed).spawn(restarts):
        labels, inertia = _lloyd(points, k, np.random.default_rng(child))
        if inertia < best_inertia - 1e-12:
            best_labels, best_inertia = labels, inertia
    return best_labels


def _donate_to_empties(labels: np.ndarray, points: np.ndarray, k: int) -> np.ndarray:
    """Guarantee k nonempty clusters by donating from the largest one."""
    labels = labels.copy()
    for c in range(k):
        if np.any(labels == c):
            continue
        counts = np.bincount(labels, minlength=k)
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        center = points[members].mean(axis=0)
        far = members[int(np.argmax(((points[members] - center) ** 2).sum(axis=1)))]
        labels[far] = c
    return labels


def spectral_split(distances: np.ndarray, n_clusters: int, seed: int) -> np.ndarray:
    """Cluster rows of a distance matrix into n_clusters labels.

    The Gaussian affinity bandwidth is the median off-diagonal distance;
    the embedding uses the nontrivial smallest eigenvectors of the
    symmetric normalized Laplacian.  Every label is guaranteed nonempty.
    """
    distances = np.asarray(distances, dtype=float)
    n = len(distances)
    if n_clusters < 2:
        raise ParameterError("need at least two clusters")
    if n < n_clusters:
        raise DegenerateSplitError(f"cannot split {n} tiles into {n_clusters} clusters")
    if n == n_clusters:
        return np.arange(n)
    sym = 0.5 * (distances + distances.T)
    off = sym[~np.eye(n, dtype=bool)]
    sigma = float(np.median(off))
    if sigma <= 0.0:
        sigma = float(np.mean(off))
    if sigma <= 0.0:
        # all distances zero: any balanced assignment is as good as another
        return _donate_to_empties(np.zeros(n, dtype=int), np.zeros((n, 1)), n_clusters)
    affinity = np.exp(-(sym * sym) / (2.0 * sigma * sigma))
    np.fill_diagonal(affinity, 1.0)
    inv_sqrt_deg = 1.0 / np.sqrt(affinity.sum(axis=1))
    lap = np.eye(n) - inv_sqrt_deg[:, None] * affinity * inv_sqrt_deg[None, :]
    lap = 0.5 * (lap + lap.T)
    _, vecs = np.linalg.eigh(lap)
    embedding = vecs[:, 1:n_clusters]   # drop the trivial constant-direction vector
    labels = _lloyd_best(embedding, n_clusters, seed)
    return _donate_to_empties(labels, embedding, n_clusters)


def build_tree(entries: list[tuple[int, LayoutDescriptor]], branching: int = 3,
               leaf_capacity: int = 8, seed: int = 0,
               distances: np.ndarray | None = None) -> SemanticTree:
    """Recursively split tiles until nodes hold at most leaf_capacity tiles.

    A precomputed full-mask pairwise matrix can be passed; otherwise it is
    computed here.  Node ids are assigned breadth-first, the root is node 0.
    """
    if branching < 2:
        raise ParameterError("branching factor must be at least 2")
    if leaf_capacity < 1:
        raise ParameterError("leaf capacity must be at least 1")
    if not entries:
        raise ParameterError("cannot build a tree over zero tiles")
    ids = [tid for tid, _ in entries]
    if distances is None:
        distances = pairwise_distance_matrix([d for _, d in entries])
    nodes = [TreeNode(0, 0, -1, list(ids))]
    position = {tid: i for i, (tid, _) in enumerate(entries)}
    queue = [0]
    while queue:
        node_id = queue.pop(0)
        node = nodes[node_id]
        if len(node.tile_ids) <= leaf_capacity or len(node.tile_ids) < branching:
            continue
        rows = np.array([position[t] for t in node.tile_ids])
        sub = distances[np.ix_(rows, rows)]
        node_seed = int(np.random.SeedSequence((seed, node_id)).generate_state(1)[0])
        labels = spectral_split(sub, branching, node_seed)
        for c in range(branching):
            member_ids = [t for t, lbl in zip(node.tile_ids, labels) if lbl == c]
            child = TreeNode(len(nodes), node.layer + 1, node_id, member_ids)
            node.children.append(child.id)
            nodes.append(child)
            queue.append(child.id)
    return SemanticTree(nodes, branching, leaf_capacity, seed)


def tree_search(tree: SemanticTree, descriptors: dict[int, LayoutDescriptor],
                query: LayoutDescriptor, mask: FovMask,
                params: CombinedScoreParams | None = None,
                budget: TraversalBudget | None = None) -> tuple[MatchResult, int]:
    """Descend the tree toward the cheapest-looking branch and scan its leaf.

    Returns the best leaf tile plus the number of descriptor comparisons
    actually computed (a per-query cache deduplicates repeats).
    """
    if params is None:
        params = CombinedScoreParams()
    if budget is None:
        budget = TraversalBudget()
    rng = np.random.default_rng(budget.seed)
    cache: dict[int, tuple[float, int]] = {}
    comparisons = 0

    def score(tile_id: int) -> tuple[float, int]:
        nonlocal comparisons
        hit = cache.get(tile_id)
        if hit is not None:
            return hit
        ref = descriptors[tile_id]
        d2 = _profile_many(query.values, ref.values[None], mask.weights)[0]
        k = int(np.argmin(d2))
        total = math.sqrt(float(d2[k])) + params.lambda_ * presence_mismatch(
            query.presence, ref.presence, params.asymmetric)
        cache[tile_id] = (total, k)
        comparisons += 1
        return total, k

    best: MatchResult | None = None

    def scan_leaf(node: TreeNode) -> None:
        nonlocal best
        for tid in node.tile_ids:
            d, k = score(tid)
            if best is None or (d, tid) < (best.distance, best.tile_id):
                best = MatchResult(tid, d, k, 1)

    def visit(node: TreeNode) -> None:
        if node.is_leaf:
            scan_leaf(node)
            return
        child_scores = []
        for order, cid in enumerate(node.children):
            child = tree.nodes[cid]
            n = len(child.tile_ids)
            take = min(budget.samples_per_child, n)
            picked = rng.choice(n, size=take, replace=False)
            sampled = min(score(child.tile_ids[int(i)])[0] for i in picked)
            child_scores.append((sampled, order, cid))
        child_scores.sort()
        for _, _, cid in child_scores[:budget.spill]:
            visit(tree.nodes[cid])

    visit(tree.root)
    assert best is not None
    return best, comparisons
