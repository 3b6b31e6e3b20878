"""Scratch: one end-to-end run of the first simulation-study configuration."""
import time

import numpy as np

from muxblock import (FitConfig, Hyperparameters, MultiplexNetwork,
                      TruncationConfig, align_to_truth, extract_assignments,
                      fit, initialize_state, nmi, sample_network)

RHO = np.array([[0.8, 0.5, 0.2],
                [0.4, 0.7, 0.05],
                [0.2, 0.01, 0.6]])
GAMMA = np.array([[0.8, 0.1, 0.1],
                  [0.0, 0.5, 0.5]])


def one_run(seed, m_w, m_z, verbose=False):
    n, l = 250, 3
    w = np.array([0] * 150 + [1] * 100)
    net, truth = sample_network(n, l, rho=RHO, gamma=GAMMA, w=w, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
    means = np.where(w[:, None] == 0, 1.5, -1.5)
    X = means + rng.normal(size=(n, 3))

    t0 = time.perf_counter()
    state = initialize_state(net, X, TruncationConfig(m_w, m_z), Hyperparameters())
    t_init = time.perf_counter() - t0
    init_res = extract_assignments(state)
    init_global = nmi(init_res.global_labels, truth.w)
    init_layer = np.mean([nmi(init_res.layer_labels[e], truth.z[e]) for e in range(l)])

    config = FitConfig(m_w=m_w, m_z=m_z, max_iter=10)
    t0 = time.perf_counter()
    state, report = fit(net, X, Hyperparameters(), config, state)
    t_fit = time.perf_counter() - t0
    res = align_to_truth(extract_assignments(state), truth)
    g = nmi(res.global_labels, truth.w)
    lay = np.mean([nmi(res.layer_labels[e], truth.z[e]) for e in range(l)])
    if verbose:
        print(f"  init {t_init:.2f}s fit {t_fit:.2f}s sweeps {report.num_sweeps} "
              f"elbo[{report.elbo_trace[0]:.0f} -> {report.elbo_trace[-1]:.0f}]")
        print(f"  init NMI g={init_global:.3f} l={init_layer:.3f}")
    return g, lay, res.occupied_global, res.occupied_layer


for m_w, m_z in [(2, 3), (5, 5)]:
    print(f"== truncation ({m_w},{m_z})")
    t0 = time.perf_counter()
    out = [one_run(s, m_w, m_z, verbose=(s < 2)) for s in range(8)]
    gs = [o[0] for o in out]
    ls = [o[1] for o in out]
    occ = [(o[2], o[3]) for o in out]
    print(f"  global NMI {np.round(gs, 3)}")
    print(f"  layer  NMI {np.round(ls, 3)}")
    print(f"  occupied {occ}")
    print(f"  total {time.perf_counter() - t0:.1f}s for 8 runs")
