"""Scratch experiment: per-substep ELBO monotonicity with snapshot updates."""
import numpy as np

from muxblock import engine as en
from muxblock.gaussian import hermgauss, log_chol_from_sigma
from muxblock.model import Hyperparameters, MultiplexNetwork


def random_state(rng, n, l, m_w, m_z, p):
    phi_w = rng.dirichlet(np.ones(m_w), size=n)
    phi_z = rng.dirichlet(np.ones(m_z), size=(l, n))
    def pos(shape):
        return rng.uniform(0.3, 4.0, size=shape)
    theta = rng.normal(size=(m_w, p))
    chol_log = np.stack([log_chol_from_sigma(np.eye(p) * rng.uniform(0.2, 2.0) +
                                             0.1 * np.ones((p, p)))
                         for _ in range(m_w)])
    sigma0 = np.stack([np.eye(p) * rng.uniform(0.2, 2.0) for _ in range(m_w)])
    return en.VariationalState(
        phi_w=phi_w, phi_z=phi_z,
        rho_a=pos((m_z, m_z)), rho_b=pos((m_z, m_z)),
        gamma_a=pos((m_w, m_z)), gamma_b=pos((m_w, m_z)),
        theta=theta, chol_log=chol_log,
        theta0=rng.normal(size=(m_w, p)), sigma0=sigma0,
        nu=pos(m_w), omega=pos(m_w))


def main():
    rng = np.random.default_rng(123)
    quad = hermgauss(32)
    worst = {}
    for trial in range(200):
        n = rng.integers(4, 11)
        l = rng.integers(1, 4)
        m_w = rng.integers(2, 4)
        m_z = rng.integers(2, 4)
        p = rng.integers(1, 4)
        dens = rng.uniform(0.1, 0.7)
        a = (rng.random((l, n, n)) < dens).astype(np.int8)
        for i in range(n):
            a[:, i, i] = 0
        net = MultiplexNetwork(a)
        X = rng.normal(size=(n, p))
        hyper = Hyperparameters()
        state = random_state(rng, n, l, m_w, m_z, p)
        for sweep in range(3):
            for name, apply in [
                ("rho", lambda s: setattr_pair(s, "rho_a", "rho_b", en.update_rho(s, net, hyper))),
                ("gamma", lambda s: setattr_pair(s, "gamma_a", "gamma_b", en.update_gamma(s, hyper))),
                ("phi0", lambda s: setattr_pair(s, "theta0", "sigma0", en.update_phi0(s, hyper))),
                ("sigma2", lambda s: setattr_pair(s, "nu", "omega", en.update_sigma2(s, hyper))),
                ("z", lambda s: setattr(s, "phi_z", en.update_z(s, net))),
                ("w", lambda s: setattr(s, "phi_w", en.update_w(s, net, X, quad))),
            ]:
                before = en.elbo(state, net, X, hyper, quad)
                apply(state)
                after = en.elbo(state, net, X, hyper, quad)
                delta = after - before
                if delta < worst.get(name, np.inf):
                    worst[name] = delta
    for name, delta in sorted(worst.items()):
        flag = "VIOLATION" if delta < -1e-6 else "ok"
        print(f"{name:8s} worst delta {delta:+.3e}  {flag}")


def setattr_pair(state, n1, n2, pair):
    setattr(state, n1, pair[0])
    setattr(state, n2, pair[1])


if __name__ == "__main__":
    main()
