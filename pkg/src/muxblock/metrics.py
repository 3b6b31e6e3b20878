"""Clustering quality metrics and label extraction from responsibilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import VariationalState
from .errors import ValidationError
from .initialization import align_labels
from .model import GroundTruth


@dataclass
class ClusteringResult:
    """Hard assignments read off a fitted state."""

    global_labels: np.ndarray   # (N,)
    layer_labels: np.ndarray    # (L, N)
    occupied_global: int
    occupied_layer: int


def extract_assignments(state: VariationalState) -> ClusteringResult:
    """Argmax per responsibility row; ties go to the lowest group index."""
    global_labels = state.phi_w.argmax(axis=1)
    layer_labels = state.phi_z.argmax(axis=2)
    return ClusteringResult(
        global_labels=global_labels,
        layer_labels=layer_labels,
        occupied_global=int(np.unique(global_labels).size),
        occupied_layer=int(np.unique(layer_labels).size),
    )


def confusion_matrix(a, b, k_a: int, k_b: int) -> np.ndarray:
    """Count matrix with entry (r, c) = #{i : a_i = r, b_i = c}."""
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValidationError("labels must be equal-length non-empty vectors")
    if a.min() < 0 or b.min() < 0 or a.max() >= k_a or b.max() >= k_b:
        raise ValidationError("labels out of range")
    counts = np.zeros((k_a, k_b), dtype=np.int64)
    np.add.at(counts, (a, b), 1)
    return counts


def _entropy(freq: np.ndarray) -> float:
    pos = freq[freq > 0]
    return float(-(pos * np.log(pos)).sum())


def nmi(a, b, normalizer: str = "arithmetic") -> float:
    """Normalized mutual information between two labelings, in [0, 1].

    Mutual information divided by the arithmetic (default) or geometric mean
    of the two label entropies.  Two constant labelings describe the same
    single-block partition, so that degenerate pair scores 1.
    """
    a = np.asarray(a, dtype=int).ravel()
    b = np.asarray(b, dtype=int).ravel()
    if a.shape != b.shape or a.size == 0:
        raise ValidationError("labels must be equal-length non-empty vectors")
    counts = confusion_matrix(a - a.min(), b - b.min(),
                              int(a.max() - a.min()) + 1,
                              int(b.max() - b.min()) + 1)
    n = a.size
    joint = counts / n
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    ha, hb = _entropy(pa), _entropy(pb)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    outer = np.outer(pa, pb)
    mask = joint > 0
    mi = float((joint[mask] * np.log(joint[mask] / outer[mask])).sum())
    if normalizer == "arithmetic":
        denom = 0.5 * (ha + hb)
    elif normalizer == "geometric":
        denom = np.sqrt(ha * hb)
    else:
        raise ValidationError(f"unknown normalizer {normalizer!r}")
    if denom == 0.0:
        return 0.0
    return min(max(mi / denom, 0.0), 1.0)


def align_to_truth(result: ClusteringResult, truth: GroundTruth) -> ClusteringResult:
    """Relabel inferred groups for maximum agreement with the simulated truth.

    The global labels and each layer's labels are aligned independently by
    optimal assignment on their confusion counts.
    """
    k_global = int(max(result.global_labels.max(), truth.w.max())) + 1
    perm = align_labels(truth.w, result.global_labels, k_global)
    global_labels = perm[result.global_labels]
    layer_labels = result.layer_labels.copy()
    for ell in range(layer_labels.shape[0]):
        k_layer = int(max(layer_labels[ell].max(), truth.z[ell].max())) + 1
        perm = align_labels(truth.z[ell], layer_labels[ell], k_layer)
        layer_labels[ell] = perm[layer_labels[ell]]
    return ClusteringResult(
        global_labels=global_labels,
        layer_labels=layer_labels,
        occupied_global=result.occupied_global,
        occupied_layer=result.occupied_layer,
    )
