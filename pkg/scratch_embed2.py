"""Scratch: coordinate scaling and min-size effects on init clustering."""
import numpy as np

from muxblock import sample_network, nmi
from muxblock.initialization import (assign_outliers, density_cluster,
                                     spectral_embed)

RHO = np.array([[0.8, 0.5, 0.2], [0.4, 0.7, 0.05], [0.2, 0.01, 0.6]])
GAMMA = np.array([[0.8, 0.1, 0.1], [0.0, 0.5, 0.5]])

n, l = 250, 3
w = np.array([0] * 150 + [1] * 100)

def cluster_nmi(points, cap, truthlab, start):
    res = density_cluster(points, cap, start)
    labs = assign_outliers(points, res).labels
    return res.num_clusters, nmi(labs, truthlab)

print("=== layer matrices, cap 5 (want 3 clusters, layer truth) ===")
for seed in range(3):
    net, truth = sample_network(n, l, rho=RHO, gamma=GAMMA, w=w, seed=seed)
    for scale in ("none", "sqrt", "full"):
        row = []
        for start in (5, 10, 20):
            emb = spectral_embed(net.adjacency[0].astype(float), 5)
            co = emb.coordinates
            if scale == "sqrt":
                co = co * np.sqrt(emb.singular_values)
            elif scale == "full":
                co = co * emb.singular_values
            row.append(cluster_nmi(co, 5, truth.z[0], start))
        print(f" seed {seed} scale={scale:5s} " +
              " ".join(f"start={s}:{c}cl/{v:.3f}" for s, (c, v) in zip((5,10,20), row)))

print("=== aggregated matrix, cap 2 / cap 5 (want 2 clusters, global truth) ===")
for seed in range(4):
    net, truth = sample_network(n, l, rho=RHO, gamma=GAMMA, w=w, seed=seed)
    agg = net.adjacency.sum(axis=0).astype(float)
    for cap in (2, 5):
        for scale in ("none", "sqrt", "full"):
            row = []
            for d in (cap,):
                emb = spectral_embed(agg, d)
                co = emb.coordinates
                if scale == "sqrt":
                    co = co * np.sqrt(emb.singular_values)
                elif scale == "full":
                    co = co * emb.singular_values
                for start in (5, 15):
                    row.append(cluster_nmi(co, cap, w, start))
            print(f" seed {seed} cap={cap} scale={scale:5s} " +
                  " ".join(f"{c}cl/{v:.3f}" for c, v in row))
