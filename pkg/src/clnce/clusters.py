"""Cluster construction: attributes, hierarchy levels, k-means, synthetic modes.

All cluster ids are assigned in first-occurrence order so the same inputs
always produce the same assignment vector.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset, HierarchyGraph
from .errors import (
    DataError,
    GraphError,
    NumericError,
    ParameterError,
    SizeError,
)


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-sample cluster ids plus a provenance tag describing their origin."""

    assignment: np.ndarray
    num_clusters: int
    provenance: str

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)
        if a.ndim != 1:
            raise ParameterError("assignment must be a vector")
        if a.size and (a.min() < 0 or a.max() >= self.num_clusters):
            raise ParameterError("cluster id outside [0, num_clusters)")
        if self.num_clusters > a.size:
            raise ParameterError("num_clusters exceeds num_samples")
        if self.provenance == "instance_id":
            if self.num_clusters != a.size or len(set(a.tolist())) != a.size:
                raise ParameterError("instance_id assignment must be a bijection")

    @property
    def num_samples(self) -> int:
        return self.assignment.size


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignment: ClusterAssignment
    inertia: float
    iterations_run: int
    inertia_history: tuple[float, ...]


def _first_occurrence_ids(keys) -> tuple[np.ndarray, int]:
    """Map hashable keys to dense ids in order of first appearance."""
    table: dict = {}
    out = np.empty(len(keys), dtype=np.int64)
    for i, k in enumerate(keys):
        out[i] = table.setdefault(k, len(table))
    return out, len(table)


def attribute_entropy(column: np.ndarray) -> float:
    """Binary entropy (nats) of one attribute column."""
    col = np.asarray(column)
    if col.size == 0:
        raise SizeError("empty attribute column")
    if not np.isin(col, (0, 1)).all():
        raise ParameterError("attribute entries must be 0 or 1")
    p = float(col.mean())
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log(p) - (1 - p) * np.log(1 - p))


def clusters_from_attributes(attributes: np.ndarray, k: int) -> ClusterAssignment:
    """Group samples by their pattern over the top-k highest-entropy attributes.

    Ties in entropy keep the lower column index first.
    """
    attrs = np.asarray(attributes)
    if attrs.ndim != 2:
        raise ParameterError("attribute matrix must be 2-D")
    num_attrs = attrs.shape[1]
    if k <= 0:
        raise ParameterError("k must be positive")
    if k > num_attrs:
        raise ParameterError(f"k={k} exceeds {num_attrs} attributes")
    entropies = [attribute_entropy(attrs[:, j]) for j in range(num_attrs)]
    order = sorted(range(num_attrs), key=lambda j: (-entropies[j], j))
    selected = sorted(order[:k])
    patterns = [tuple(row) for row in attrs[:, selected]]
    assignment, n_clusters = _first_occurrence_ids(patterns)
    return ClusterAssignment(assignment, n_clusters, provenance=f"attributes({k})")


def _topo_order(g: HierarchyGraph) -> list[str]:
    indeg = {n: 0 for n in g.nodes}
    for _, c in g.edges:
        indeg[c] += 1
    frontier = sorted(n for n, d in indeg.items() if d == 0)
    order = []
    children = {n: [] for n in g.nodes}
    for p, c in g.edges:
        children[p].append(c)
    while frontier:
        n = frontier.pop(0)
        order.append(n)
        for c in sorted(children[n]):
            indeg[c] -= 1
            if indeg[c] == 0:
                frontier.append(c)
        frontier.sort()
    if len(order) != len(g.nodes):
        raise GraphError("hierarchy contains a cycle")
    return order


def prune_to_tree(g: HierarchyGraph) -> HierarchyGraph:
    """Drop extra parents so every node keeps one path to the single root.

    The retained parent is the one on the longest root-to-node path; ties
    keep the lexicographically smallest parent id.
    """
    order = _topo_order(g)
    roots = g.roots()
    if len(roots) != 1:
        raise GraphError(f"expected one root, found {roots}")
    root = roots[0]
    # longest root-to-node path length, root at depth 1
    depth = {root: 1}
    parents = {n: [] for n in g.nodes}
    for p, c in g.edges:
        parents[c].append(p)
    kept_edges = []
    for n in order:
        if n == root:
            continue
        reach = [p for p in parents[n] if p in depth]
        if not reach:
            raise GraphError(f"node {n!r} unreachable from root")
        best = min(reach, key=lambda p: (-depth[p], p))
        depth[n] = depth[best] + 1
        kept_edges.append((best, n))
    return HierarchyGraph(
        nodes=g.nodes, edges=tuple(kept_edges), leaf_label_map=dict(g.leaf_label_map)
    )


def _node_depths(tree: HierarchyGraph) -> dict[str, int]:
    parent = {}
    for p, c in tree.edges:
        if c in parent:
            raise GraphError(f"node {c!r} has multiple parents; prune first")
        parent[c] = p
    roots = tree.roots()
    if len(roots) != 1:
        raise GraphError(f"expected one root, found {roots}")
    depth = {roots[0]: 1}
    order = _topo_order(tree)
    for n in order:
        if n in depth:
            continue
        depth[n] = depth[parent[n]] + 1
    return depth


def clusters_from_hierarchy(
    tree: HierarchyGraph, level: int, d: Dataset
) -> ClusterAssignment:
    """Assign each sample the ancestor of its label's leaf at the given depth.

    Root is depth 1; a leaf shallower than the requested level stands in for
    its missing ancestor.
    """
    if level < 1:
        raise ParameterError("level must be >= 1")
    if d.labels is None:
        raise DataError("dataset has no labels to map onto the hierarchy")
    parent = {c: p for p, c in tree.edges}
    if len(parent) != len(tree.edges):
        raise GraphError("tree has a multi-parent node; prune first")
    depth = _node_depths(tree)
    max_leaf_depth = max(depth[leaf] for leaf in tree.leaf_label_map)
    if level > max_leaf_depth:
        raise ParameterError(f"level {level} exceeds max leaf depth {max_leaf_depth}")

    def ancestor_at(node: str) -> str:
        while depth[node] > level:
            node = parent[node]
        return node

    leaf_by_label = {lab: leaf for leaf, lab in tree.leaf_label_map.items()}
    keys = []
    for lab in d.labels:
        if int(lab) not in leaf_by_label:
            raise DataError(f"label {int(lab)} has no leaf in the hierarchy")
        keys.append(ancestor_at(leaf_by_label[int(lab)]))
    assignment, n_clusters = _first_occurrence_ids(keys)
    return ClusterAssignment(assignment, n_clusters, provenance=f"hierarchy({level})")


def _kmeans_pp_init(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((K, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, K):
        total = d2.sum()
        if total <= 0:
            centroids[j] = points[rng.integers(n)]
            continue
        probs = d2 / total
        idx = rng.choice(n, p=probs)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans(
    points: np.ndarray,
    K: int,
    max_iters: int = 100,
    tol: float = 1e-8,
    seed: int = 0,
) -> KMeansResult:
    """Lloyd iterations from a seeded k-means++ start.

    Empty clusters are repaired by reseeding their centroid at the point
    farthest from its currently assigned centroid. Nearest-centroid ties go
    to the lowest centroid index.
    """
    pts = np.asarray(points, dtype=np.float64)
    if not np.isfinite(pts).all():
        raise NumericError("non-finite input to kmeans")
    n = pts.shape[0]
    if K <= 0 or K > n:
        raise ParameterError(f"K={K} must lie in [1, {n}]")
    if max_iters < 1:
        raise ParameterError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(pts, K, rng)
    prev_inertia = np.inf
    history: list[float] = []
    assign = np.zeros(n, dtype=np.int64)
    it = 0
    for it in range(1, max_iters + 1):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        # repair empty clusters one at a time; repairs can empty other
        # clusters, so rescan until stable (at most K passes)
        for _ in range(K):
            empty = [j for j in range(K) if not (assign == j).any()]
            if not empty:
                break
            j = empty[0]
            point_d2 = d2[np.arange(n), assign]
            far = int(point_d2.argmax())
            centroids[j] = pts[far]
            d2[:, j] = ((pts - centroids[j]) ** 2).sum(axis=1)
            assign = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), assign].sum())
        history.append(inertia)
        if prev_inertia - inertia < tol:
            break
        prev_inertia = inertia
        for j in range(K):
            members = pts[assign == j]
            if members.size:
                centroids[j] = members.mean(axis=0)
    result = ClusterAssignment(assign, K, provenance=f"kmeans({K})")
    return KMeansResult(
        centroids=centroids,
        assignment=result,
        inertia=history[-1],
        iterations_run=it,
        inertia_history=tuple(history),
    )


def clusters_from_labels(labels: np.ndarray) -> ClusterAssignment:
    labs = np.asarray(labels, dtype=np.int64)
    if labs.ndim != 1 or labs.size == 0:
        raise ParameterError("labels must be a non-empty vector")
    if labs.min() < 0:
        raise ParameterError("labels must be non-negative")
    # compact sparse label values; dense labels pass through unchanged
    uniq, inverse = np.unique(labs, return_inverse=True)
    return ClusterAssignment(inverse.astype(np.int64), uniq.size, provenance="labels")


def clusters_instance_id(n: int) -> ClusterAssignment:
    if n < 1:
        raise ParameterError("n must be >= 1")
    return ClusterAssignment(np.arange(n, dtype=np.int64), n, provenance="instance_id")


def refine_clusters(labels: np.ndarray, splits_per_class: int, seed: int) -> ClusterAssignment:
    """Split each class into equal-size random subclusters (Z refines T)."""
    labs = np.asarray(labels, dtype=np.int64)
    if splits_per_class < 1:
        raise ParameterError("splits_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    assign = np.empty(labs.size, dtype=np.int64)
    next_id = 0
    for c in np.unique(labs):
        members = np.flatnonzero(labs == c)
        if splits_per_class > members.size:
            raise ParameterError(
                f"class {c} has {members.size} samples, cannot split into "
                f"{splits_per_class}"
            )
        perm = rng.permutation(members)
        for s, chunk in enumerate(np.array_split(perm, splits_per_class)):
            assign[chunk] = next_id + s
        next_id += splits_per_class
    return ClusterAssignment(
        assign, next_id, provenance=f"synthetic(refine,{splits_per_class})"
    )


def coarsen_clusters(labels: np.ndarray, merge_groups) -> ClusterAssignment:
    """Merge classes into groups (Z is a function of T, so H(Z|T)=0)."""
    labs = np.asarray(labels, dtype=np.int64)
    classes = set(np.unique(labs).tolist())
    group_of: dict[int, int] = {}
    for gi, group in enumerate(merge_groups):
        for c in group:
            if c in group_of:
                raise ParameterError(f"class {c} appears in two merge groups")
            group_of[int(c)] = gi
    if set(group_of) != classes:
        raise ParameterError("merge_groups must partition the observed label set")
    assign = np.array([group_of[int(c)] for c in labs], dtype=np.int64)
    return ClusterAssignment(
        assign, len(merge_groups), provenance=f"synthetic(coarsen,{len(merge_groups)})"
    )


def permute_clusters(
    labels: np.ndarray,
    base: ClusterAssignment,
    fixed_class_set,
    seed: int,
) -> ClusterAssignment:
    """Shuffle subcluster memberships outside the fixed classes.

    Produces intermediate info-plane points between the refine endpoint and
    an uninformative assignment.
    """
    labs = np.asarray(labels, dtype=np.int64)
    if base.num_samples != labs.size:
        raise ParameterError("base assignment length mismatch")
    fixed = set(int(c) for c in fixed_class_set)
    rng = np.random.default_rng(seed)
    assign = base.assignment.copy()
    free = np.flatnonzero(~np.isin(labs, sorted(fixed)))
    assign[free] = assign[rng.permutation(free)]
    return ClusterAssignment(
        assign, base.num_clusters, provenance=f"synthetic(permute,{sorted(fixed)})"
    )


def synthesize_clusters(labels: np.ndarray, spec: dict) -> ClusterAssignment:
    """Dispatch on a synthetic-mode spec dict: {"mode": ..., params}."""
    mode = spec.get("mode")
    if mode == "refine":
        return refine_clusters(labels, spec["splits_per_class"], spec.get("seed", 0))
    if mode == "coarsen":
        return coarsen_clusters(labels, spec["merge_groups"])
    if mode == "permute":
        base = refine_clusters(
            labels, spec["splits_per_class"], spec.get("seed", 0)
        )
        return permute_clusters(
            labels, base, spec.get("fixed_class_set", ()), spec.get("seed", 0)
        )
    raise ParameterError(f"unknown synthetic mode {mode!r}")


def save_assignment(a: ClusterAssignment, ids, csv_path: str) -> None:
    """Write `id,cluster` CSV plus a JSON sidecar with count and provenance."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "cluster"])
        for sid, c in zip(ids, a.assignment):
            writer.writerow([sid, int(c)])
    sidecar = {"num_clusters": a.num_clusters, "provenance": a.provenance}
    with open(csv_path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")


def load_assignment(csv_path: str) -> ClusterAssignment:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["id", "cluster"]:
            raise ParameterError(f"{csv_path}: expected 'id,cluster' header")
        vals = [int(row[1]) for row in reader]
    with open(csv_path + ".json", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return ClusterAssignment(
        np.array(vals, dtype=np.int64),
        int(sidecar["num_clusters"]),
        provenance=str(sidecar["provenance"]),
    )
