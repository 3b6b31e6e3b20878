"""Scratch: (5,5) recovery with improved layer init and candidate global inits."""
import time

import numpy as np

from muxblock import (FitConfig, Hyperparameters, TruncationConfig,
                      align_to_truth, extract_assignments, fit, nmi,
                      sample_network)
from muxblock.engine import update_phi0, VariationalState
from muxblock.initialization import (assign_outliers, density_cluster,
                                     align_labels, init_gamma, init_rho,
                                     soften_labels, spectral_embed)

RHO = np.array([[0.8, 0.5, 0.2], [0.4, 0.7, 0.05], [0.2, 0.01, 0.6]])
GAMMA = np.array([[0.8, 0.1, 0.1], [0.0, 0.5, 0.5]])


def layer_labels_fixed(net, m_z, start=10):
    labels = []
    for ell in range(net.num_layers):
        emb = spectral_embed(net.adjacency[ell].astype(float), m_z)
        co = emb.coordinates * emb.singular_values
        res = assign_outliers(co, density_cluster(co, m_z, start))
        labels.append(res.labels)
    labels = np.stack(labels)
    for ell in range(1, net.num_layers):
        perm = align_labels(labels[0], labels[ell], m_z)
        labels[ell] = perm[labels[ell]]
    return labels


def global_from_profiles(layer_hard, m_w, m_z):
    l = layer_hard.shape[0]
    prof = np.stack([(layer_hard == g).sum(axis=0) for g in range(m_z)], axis=1) / l
    res = assign_outliers(prof, density_cluster(prof, m_w, 10))
    return res.labels


def global_from_agg(net, m_w):
    agg = net.adjacency.sum(axis=0).astype(float)
    emb = spectral_embed(agg, m_w)
    co = emb.coordinates * emb.singular_values
    return assign_outliers(co, density_cluster(co, m_w, 10)).labels


def build_state(net, X, m_w, m_z, layer_hard, global_hard, hyper):
    p = X.shape[1]
    phi_z = np.stack([soften_labels(layer_hard[e], m_z) for e in range(net.num_layers)])
    phi_w = soften_labels(global_hard, m_w)
    rho_a, rho_b = init_rho(net, layer_hard, m_z, hyper)
    gamma_a, gamma_b = init_gamma(global_hard, layer_hard, m_w, m_z, hyper)
    mu = hyper.mean_vector(p)
    st = VariationalState(
        phi_w=phi_w, phi_z=phi_z, rho_a=rho_a, rho_b=rho_b,
        gamma_a=gamma_a, gamma_b=gamma_b,
        theta=np.zeros((m_w, p)), chol_log=np.zeros((m_w, p, p)),
        theta0=np.tile(mu, (m_w, 1)), sigma0=np.tile(np.eye(p), (m_w, 1, 1)),
        nu=np.full(m_w, hyper.nu0 + p / 2.0), omega=np.full(m_w, hyper.omega0 + p))
    st.theta0, st.sigma0 = update_phi0(st, hyper)
    return st


def run(seed, m_w, m_z, global_mode):
    n, l = 250, 3
    w = np.array([0] * 150 + [1] * 100)
    net, truth = sample_network(n, l, rho=RHO, gamma=GAMMA, w=w, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
    X = np.where(w[:, None] == 0, 1.5, -1.5) + rng.normal(size=(n, 3))
    hyper = Hyperparameters()
    layer_hard = layer_labels_fixed(net, m_z)
    if global_mode == "agg":
        ghard = global_from_agg(net, m_w)
    else:
        ghard = global_from_profiles(layer_hard, m_w, m_z)
    ginit = nmi(ghard, truth.w)
    state = build_state(net, X, m_w, m_z, layer_hard, ghard, hyper)
    state, rep = fit(net, X, hyper, FitConfig(m_w=m_w, m_z=m_z, max_iter=10), state)
    res = align_to_truth(extract_assignments(state), truth)
    g = nmi(res.global_labels, truth.w)
    lay = np.mean([nmi(res.layer_labels[e], truth.z[e]) for e in range(l)])
    return ginit, g, lay, res.occupied_global, res.occupied_layer


if __name__ == "__main__":
    for mode in ("agg", "profile"):
        print(f"=== global init: {mode}, truncation (5,5)")
        t0 = time.perf_counter()
        for seed in range(8):
            gi, g, lay, og, ol = run(seed, 5, 5, mode)
            print(f" seed {seed}: init g-nmi {gi:.3f} -> fit g {g:.3f} l {lay:.3f} occ ({og},{ol})")
        print(f" total {time.perf_counter() - t0:.1f}s")
