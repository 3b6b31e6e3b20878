"""Scratch: diagnose the aggregated-adjacency global embedding."""
import numpy as np

from muxblock import sample_network, nmi
from muxblock.initialization import (assign_outliers, density_cluster,
                                     spectral_embed, hard_layer_labels)
from scratch_s41 import RHO, GAMMA

n, l = 250, 3
w = np.array([0] * 150 + [1] * 100)

for seed in range(4):
    net, truth = sample_network(n, l, rho=RHO, gamma=GAMMA, w=w, seed=seed)
    agg = net.adjacency.sum(axis=0).astype(float)
    emb = spectral_embed(agg, 5)
    print(f"seed {seed} singular values {np.round(emb.singular_values, 1)}")
    co = emb.coordinates
    # class separation per component
    for j in range(4):
        a, b = co[w == 0, j], co[w == 1, j]
        gap = abs(a.mean() - b.mean()) / np.sqrt(0.5 * (a.var() + b.var()) + 1e-12)
        print(f"  comp {j}: class gap {gap:.2f}")
    for d in (2, 3, 5):
        res = assign_outliers(co[:, :d], density_cluster(co[:, :d], 2))
        print(f"  density d={d}: clusters={res.num_clusters} nmi={nmi(res.labels, w):.3f}")
    # kmeans-style: 2-means on d=2
    from scipy.cluster.vq import kmeans2
    for d in (2, 3, 5):
        _, lab = kmeans2(co[:, :d], 2, seed=1, minit="++")
        print(f"  kmeans d={d}: nmi={nmi(lab, w):.3f}")
    # z-profile route: histogram of aligned layer labels
    hard = hard_layer_labels(net, 3)
    prof = np.stack([(hard == g).sum(axis=0) for g in range(3)], axis=1) / l
    res = assign_outliers(prof, density_cluster(prof, 2))
    print(f"  z-profile density: clusters={res.num_clusters} nmi={nmi(res.labels, w):.3f}")
