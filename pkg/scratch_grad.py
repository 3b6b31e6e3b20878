"""Scratch: analytic gradients vs central finite differences of the ELBO."""
import numpy as np

from muxblock import engine as en
from muxblock.gaussian import hermgauss, sigma_from_log_chol
from muxblock.model import Hyperparameters, MultiplexNetwork
from scratch_mono import random_state


def main():
    rng = np.random.default_rng(11)
    quad = hermgauss(32)
    worst_t = worst_s = worst_b = 0.0
    for trial in range(25):
        n = rng.integers(4, 11)
        l = rng.integers(1, 3)
        m_w = rng.integers(2, 4)
        m_z = rng.integers(2, 4)
        p = rng.integers(1, 4)
        a = (rng.random((l, n, n)) < 0.4).astype(np.int8)
        for i in range(n):
            a[:, i, i] = 0
        net = MultiplexNetwork(a)
        X = rng.normal(size=(n, p))
        hyper = Hyperparameters()
        state = random_state(rng, n, l, m_w, m_z, p)
        k = int(rng.integers(0, m_w))

        # theta gradient
        g = en.grad_theta(k, state, X, quad)
        fd = np.zeros(p)
        h = 1e-5
        for j in range(p):
            sp = state.copy(); sp.theta[k, j] += h
            sm = state.copy(); sm.theta[k, j] -= h
            fd[j] = (en.elbo(sp, net, X, hyper, quad) - en.elbo(sm, net, X, hyper, quad)) / (2 * h)
        rel = np.abs(g - fd).max() / max(np.abs(fd).max(), 1e-10)
        worst_t = max(worst_t, rel)

        # sigma gradient via override
        gs = en.grad_sigma(k, state, X, quad)
        sig = state.sigma()
        fds = np.zeros((p, p))
        for r in range(p):
            for c in range(p):
                up = sig.copy(); up[k, r, c] += h
                dn = sig.copy(); dn[k, r, c] -= h
                fds[r, c] = (en.elbo(state, net, X, hyper, quad, sigma_override=up)
                             - en.elbo(state, net, X, hyper, quad, sigma_override=dn)) / (2 * h)
        # symmetric-gradient convention: FD of independent entries; analytic grad is symmetric
        rel = np.abs(gs - fds).max() / max(np.abs(fds).max(), 1e-10)
        worst_s = max(worst_s, rel)

        # B gradient through the full reconstruction path
        gb = en.grad_chol_log(k, state, X, quad)
        fdb = np.zeros((p, p))
        for r in range(p):
            for c in range(p):
                sp = state.copy(); sp.chol_log[k, r, c] += h
                sm = state.copy(); sm.chol_log[k, r, c] -= h
                fdb[r, c] = (en.elbo(sp, net, X, hyper, quad) - en.elbo(sm, net, X, hyper, quad)) / (2 * h)
        rel = np.abs(gb - fdb).max() / max(np.abs(fdb).max(), 1e-10)
        worst_b = max(worst_b, rel)
    print(f"worst rel err  theta {worst_t:.2e}  sigma {worst_s:.2e}  B {worst_b:.2e}")


if __name__ == "__main__":
    main()
