"""Informed initialization of the variational state.

Per layer: embed the adjacency matrix by its top left singular vectors,
cluster the embedding with a density-based procedure whose minimum cluster
size escalates until the cluster count fits under the truncation, pull
outliers to the nearest cluster centroid, and align labels across layers to
layer 0 by optimal assignment.  Global groups are then clustered on each
node's layer-group frequency profile (the statistic the hierarchy actually
couples across layers), with a gap-based Ward cut choosing the cluster count
under the truncation.  Block probabilities and stick fractions are
moment-matched to the hard labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, ward
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import minimum_spanning_tree

from .engine import VariationalState, _covariate_values, update_phi0
from .errors import ValidationError
from .model import Hyperparameters, MultiplexNetwork, TruncationConfig

PROPORTION_CLAMP = 1e-6      # keeps the posterior-mean inversion finite
SOFT_LABEL_EPSILON = 0.05    # responsibility mass spread off the hard label


@dataclass
class Embedding:
    """Spectral coordinates with their singular values, columns ordered."""

    coordinates: np.ndarray      # (N, d)
    singular_values: np.ndarray  # (d,)


@dataclass
class ClusterLabels:
    """Cluster assignment with -1 marking outliers."""

    labels: np.ndarray
    num_clusters: int
    warning: str | None = None


def spectral_embed(adjacency: np.ndarray, d: int) -> Embedding:
    """Top-d left singular vectors, sign-fixed for determinism.

    Each column is flipped so its largest-magnitude entry is positive, making
    repeated calls bitwise identical.
    """
    a = np.asarray(adjacency, dtype=float)
    n = a.shape[0]
    if not 1 <= d <= n:
        raise ValidationError(f"embedding dimension {d} outside [1, {n}]")
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    u = u[:, :d].copy()
    for j in range(d):
        pivot = np.abs(u[:, j]).argmax()
        if u[pivot, j] < 0:
            u[:, j] = -u[:, j]
    return Embedding(coordinates=u, singular_values=s[:d].copy())


# ---------------------------------------------------------------------------
# Density-based clustering (mutual reachability + MST + minimum-size leaves)
# ---------------------------------------------------------------------------

def _mutual_reachability(points: np.ndarray, k: int) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    k = min(k, points.shape[0] - 1)
    core = np.sort(dist, axis=1)[:, k] if k >= 1 else np.zeros(points.shape[0])
    return np.maximum(dist, np.maximum(core[:, None], core[None, :]))


def _mst_edges(graph: np.ndarray):
    """Edges (weight, i, j) of a minimum spanning tree, ascending by weight."""
    n = graph.shape[0]
    # csgraph treats explicit zeros as missing; shift weights to stay positive.
    tree = minimum_spanning_tree(graph + 1.0).tocoo()
    edges = sorted(zip(tree.data - 1.0, tree.row, tree.col))
    if len(edges) != n - 1:
        raise ValidationError("mutual reachability graph is disconnected")
    return edges


def _fragments(edges, members):
    """Connected components of ``members`` under ``edges`` (union-find)."""
    index = {node: pos for pos, node in enumerate(members)}
    parent = list(range(len(members)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for _, i, j in edges:
        ri, rj = find(index[i]), find(index[j])
        if ri != rj:
            parent[ri] = rj
    groups: dict[int, list[int]] = {}
    for node in members:
        groups.setdefault(find(index[node]), []).append(node)
    return sorted(groups.values(), key=lambda g: (-len(g), g[0]))


def _extract_leaves(edges, members, min_size, labels, next_label):
    """Peel a component from its largest edges down, collecting leaf clusters.

    Removing the current top-weight edges (ties removed together) fragments
    the component.  A split is real only when at least two fragments reach
    ``min_size``: points shed before a real split are outliers, the big
    fragments recurse.  A component that never splits again is a leaf cluster
    and keeps everything shed during its own peeling.
    """
    fallen: list[int] = []
    while True:
        if not edges:
            for i in members + fallen:
                labels[i] = next_label[0]
            next_label[0] += 1
            return
        top = edges[-1][0]
        keep = [e for e in edges if e[0] < top - 1e-12]
        fragments = _fragments(keep, members)
        big = [frag for frag in fragments if len(frag) >= min_size]
        if len(big) >= 2:
            for frag in big:
                frag_set = set(frag)
                frag_edges = [e for e in keep if e[1] in frag_set]
                _extract_leaves(frag_edges, frag, min_size, labels, next_label)
            return
        if len(big) == 1:
            frag_set = set(big[0])
            fallen.extend(i for i in members if i not in frag_set)
            edges = [e for e in keep if e[1] in frag_set]
            members = big[0]
            continue
        # Nothing can stand alone anymore: leaf cluster.
        for i in members + fallen:
            labels[i] = next_label[0]
        next_label[0] += 1
        return


def _cluster_once(points: np.ndarray, min_size: int) -> ClusterLabels:
    n = points.shape[0]
    if n == 1:
        return ClusterLabels(np.zeros(1, dtype=int), 1)
    graph = _mutual_reachability(points, min_size)
    edges = _mst_edges(graph)
    labels = np.full(n, -1, dtype=int)
    next_label = [0]
    _extract_leaves(edges, list(range(n)), min_size, labels, next_label)
    return ClusterLabels(labels, next_label[0])


def density_cluster(points: np.ndarray, max_clusters: int,
                    min_cluster_size_start: int = 5) -> ClusterLabels:
    """Density clustering with the minimum cluster size escalated to fit the cap."""
    points = np.asarray(points, dtype=float)
    if max_clusters < 1:
        raise ValidationError("max_clusters must be >= 1")
    n = points.shape[0]
    min_size = max(2, min(min_cluster_size_start, n))
    while min_size <= n:
        result = _cluster_once(points, min_size)
        if result.num_clusters <= max_clusters:
            return result
        min_size += 1
    return ClusterLabels(np.zeros(n, dtype=int), 1,
                         warning="minimum cluster size escalation exhausted; "
                                 "fell back to a single cluster")


def assign_outliers(points: np.ndarray, clustering: ClusterLabels) -> ClusterLabels:
    """Send each outlier to the nearest cluster centroid (ties to lowest index)."""
    labels = clustering.labels.copy()
    if clustering.num_clusters < 1 or (labels >= 0).sum() == 0:
        raise ValidationError("no clusters to absorb outliers")
    outliers = np.flatnonzero(labels < 0)
    if outliers.size:
        centroids = np.stack([points[labels == c].mean(axis=0)
                              for c in range(clustering.num_clusters)])
        dist = np.linalg.norm(points[outliers, None, :] - centroids[None], axis=2)
        labels[outliers] = dist.argmin(axis=1)
    return ClusterLabels(labels, clustering.num_clusters, clustering.warning)


def align_labels(reference: np.ndarray, target: np.ndarray, k: int) -> np.ndarray:
    """Permutation of 0..k-1 relabelling ``target`` for maximum agreement.

    Solved as an optimal assignment on the k x k confusion-count matrix
    (Jonker-Volgenant via scipy); returns pi with pi[t] the new name of
    target label t.
    """
    reference = np.asarray(reference, dtype=int)
    target = np.asarray(target, dtype=int)
    if reference.shape != target.shape:
        raise ValidationError("label vectors must have equal length")
    if reference.size and max(reference.max(), target.max()) >= k:
        raise ValidationError("labels must be below k")
    counts = np.zeros((k, k))
    np.add.at(counts, (target, reference), 1)
    _, perm = linear_sum_assignment(counts, maximize=True)
    return perm


def soften_labels(labels: np.ndarray, k: int,
                  epsilon: float = SOFT_LABEL_EPSILON) -> np.ndarray:
    """Hard labels to responsibilities: 1-eps on the label, eps spread evenly."""
    n = labels.shape[0]
    if k == 1:
        return np.ones((n, 1))
    resp = np.full((n, k), epsilon / (k - 1))
    resp[np.arange(n), labels] = 1.0 - epsilon
    return resp


def _order_by_size(labels: np.ndarray, k: int) -> np.ndarray:
    """Relabel clusters by decreasing size (stable), matching the stick prior's
    preference for low indices."""
    counts = np.bincount(labels, minlength=k)
    remap = np.empty(k, dtype=int)
    remap[np.argsort(-counts, kind="stable")] = np.arange(k)
    return remap[labels]


def _default_min_size(num_nodes: int) -> int:
    return max(5, num_nodes // 25)


def _hard_cluster(adjacency: np.ndarray, cap: int,
                  min_cluster_size_start: int) -> np.ndarray:
    emb = spectral_embed(adjacency, min(cap, adjacency.shape[0]))
    points = emb.coordinates * emb.singular_values
    clustering = density_cluster(points, cap, min_cluster_size_start)
    return assign_outliers(points, clustering).labels


def init_layer_groups(net: MultiplexNetwork, m_z: int,
                      min_cluster_size_start: int | None = None,
                      epsilon: float = SOFT_LABEL_EPSILON) -> np.ndarray:
    """Soft layer-group responsibilities (L, N, M_z), aligned to layer 0."""
    hard = hard_layer_labels(net, m_z, min_cluster_size_start)
    return np.stack([soften_labels(hard[ell], m_z, epsilon)
                     for ell in range(net.num_layers)])


def hard_layer_labels(net: MultiplexNetwork, m_z: int,
                      min_cluster_size_start: int | None = None) -> np.ndarray:
    """Hard aligned layer labels (L, N); layer 0 is the alignment reference.

    Per layer: singular-value-scaled spectral embedding, density clustering
    with the escalating minimum size, outlier absorption.  Layer 0's clusters
    are renamed by decreasing size and every other layer is aligned to it.
    """
    if min_cluster_size_start is None:
        min_cluster_size_start = _default_min_size(net.num_nodes)
    labels = np.stack([_hard_cluster(net.adjacency[ell], m_z, min_cluster_size_start)
                       for ell in range(net.num_layers)])
    labels[0] = _order_by_size(labels[0], m_z)
    for ell in range(1, net.num_layers):
        perm = align_labels(labels[0], labels[ell], m_z)
        labels[ell] = perm[labels[ell]]
    return labels


def _ward_gap_labels(points: np.ndarray, cap: int) -> np.ndarray:
    """Ward-linkage clustering cut at the largest relative merge-height gap.

    Chooses the cluster count in 1..cap without a preset k: the cut that
    undoes the most disproportionate merges wins.  All-identical points give
    a single cluster.
    """
    n = points.shape[0]
    if n <= 1 or cap <= 1:
        return np.zeros(n, dtype=int)
    link = ward(points)
    heights = link[:, 2]                       # ascending, length n - 1
    if heights[-1] <= 1e-12:
        return np.zeros(n, dtype=int)
    best_count, best_ratio = 1, 1.0
    for count in range(2, min(cap, n) + 1):
        undone = heights[n - count]
        kept = heights[n - count - 1] if n - count - 1 >= 0 else 0.0
        ratio = undone / max(kept, 1e-12)
        if ratio > best_ratio:
            best_ratio, best_count = ratio, count
    return fcluster(link, t=best_count, criterion="maxclust") - 1


def layer_profile_features(layer_labels: np.ndarray, m_z: int) -> np.ndarray:
    """Per-node frequencies of each layer group across layers, shape (N, M_z)."""
    num_layers = layer_labels.shape[0]
    return np.stack([(layer_labels == g).sum(axis=0) for g in range(m_z)],
                    axis=1) / num_layers


def hard_global_labels(net: MultiplexNetwork, m_w: int,
                       layer_labels: np.ndarray | None = None,
                       m_z: int | None = None) -> np.ndarray:
    """Hard global labels (N,) clustered on layer-group frequency profiles.

    The hierarchy ties layers together only through each node's distribution
    over layer groups, so nodes are clustered on those empirical profiles.
    """
    if layer_labels is None:
        m_z = m_z if m_z is not None else m_w
        layer_labels = hard_layer_labels(net, m_z)
    else:
        m_z = int(layer_labels.max()) + 1 if m_z is None else m_z
    profiles = layer_profile_features(layer_labels, m_z)
    return _order_by_size(_ward_gap_labels(profiles, m_w), m_w)


def init_global_groups(net: MultiplexNetwork, m_w: int,
                       m_z: int | None = None,
                       epsilon: float = SOFT_LABEL_EPSILON) -> np.ndarray:
    """Soft global responsibilities (N, M_w) from layer-profile clustering."""
    return soften_labels(hard_global_labels(net, m_w, m_z=m_z), m_w, epsilon)


def _invert_posterior_mean(proportions: np.ndarray) -> np.ndarray:
    """First beta shape reproducing the clamped proportion at unit second shape."""
    clamped = np.clip(proportions, PROPORTION_CLAMP, 1.0 - PROPORTION_CLAMP)
    return clamped / (1.0 - clamped)


def init_rho(net: MultiplexNetwork, layer_labels: np.ndarray, m_z: int,
             hyper: Hyperparameters) -> tuple[np.ndarray, np.ndarray]:
    """Moment-matched block beta shapes: unit second shape, inverted block mean."""
    edges = np.zeros((m_z, m_z))
    pairs = np.zeros((m_z, m_z))
    for ell in range(net.num_layers):
        onehot = np.eye(m_z)[layer_labels[ell]]
        a = net.adjacency[ell].astype(float)
        edges += onehot.T @ a @ onehot
        totals = onehot.sum(axis=0)
        pairs += np.outer(totals, totals) - onehot.T @ onehot
    rho_a = np.full((m_z, m_z), hyper.alpha0)
    rho_b = np.full((m_z, m_z), hyper.beta0)
    seen = pairs > 0
    rho_b[seen] = 1.0
    means = np.divide(edges, pairs, out=np.zeros_like(edges), where=seen)
    rho_a[seen] = _invert_posterior_mean(means[seen])
    return rho_a, rho_b


def init_gamma(global_labels: np.ndarray, layer_labels: np.ndarray,
               m_w: int, m_z: int,
               hyper: Hyperparameters) -> tuple[np.ndarray, np.ndarray]:
    """Moment-matched stick beta shapes from label co-occurrence proportions."""
    counts = np.zeros((m_w, m_z))
    for ell in range(layer_labels.shape[0]):
        np.add.at(counts, (global_labels, layer_labels[ell]), 1)
    totals = counts.sum(axis=1)
    gamma_a = np.ones((m_w, m_z))
    gamma_b = np.full((m_w, m_z), hyper.eta0)
    occupied = totals > 0
    proportions = counts[occupied] / totals[occupied, None]
    gamma_a[occupied] = _invert_posterior_mean(proportions)
    gamma_b[occupied] = 1.0
    return gamma_a, gamma_b


def initialize_state(net: MultiplexNetwork, X, trunc: TruncationConfig,
                     hyper: Hyperparameters, *, informed: bool = True,
                     min_cluster_size_start: int | None = None,
                     epsilon: float = SOFT_LABEL_EPSILON) -> VariationalState:
    """Assemble a full variational state ready for the fit loop.

    ``informed=False`` replaces the profile-based global responsibilities
    with the uniform distribution (the uninformed-initialization baseline);
    the layer-level pipeline is unchanged.
    """
    x_vals = _covariate_values(X)
    n, p = net.num_nodes, x_vals.shape[1]
    layer_hard = hard_layer_labels(net, trunc.m_z, min_cluster_size_start)
    phi_z = np.stack([soften_labels(layer_hard[ell], trunc.m_z, epsilon)
                      for ell in range(net.num_layers)])
    global_hard = hard_global_labels(net, trunc.m_w, layer_labels=layer_hard,
                                     m_z=trunc.m_z)
    if informed:
        phi_w = soften_labels(global_hard, trunc.m_w, epsilon)
    else:
        phi_w = np.full((n, trunc.m_w), 1.0 / trunc.m_w)

    rho_a, rho_b = init_rho(net, layer_hard, trunc.m_z, hyper)
    gamma_a, gamma_b = init_gamma(global_hard, layer_hard, trunc.m_w,
                                  trunc.m_z, hyper)

    mu = hyper.mean_vector(p)
    state = VariationalState(
        phi_w=phi_w, phi_z=phi_z,
        rho_a=rho_a, rho_b=rho_b,
        gamma_a=gamma_a, gamma_b=gamma_b,
        theta=np.zeros((trunc.m_w, p)),
        chol_log=np.zeros((trunc.m_w, p, p)),
        theta0=np.tile(mu, (trunc.m_w, 1)),
        sigma0=np.tile(np.eye(p), (trunc.m_w, 1, 1)),
        nu=np.full(trunc.m_w, hyper.nu0 + p / 2.0),
        omega=np.full(trunc.m_w, hyper.omega0 + p),
    )
    state.theta0, state.sigma0 = update_phi0(state, hyper)
    return state
