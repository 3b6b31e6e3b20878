"""Independent slow-path oracles used only by the tests.

Everything here is written against the generative equations directly with
explicit loops and enumeration, deliberately avoiding the package's
vectorized code paths so agreement is evidence of correctness rather than
shared bugs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, digamma, gammaln, log_ndtr, ndtr

from muxblock.engine import VariationalState
from muxblock.gaussian import GaussExpectations, chol_from_log, log_phi_ratio
from muxblock.model import (Hyperparameters, JointParams, MultiplexNetwork,
                            log_joint)


# ---------------------------------------------------------------------------
# Tiny fully-specified instances
# ---------------------------------------------------------------------------

@dataclass
class TinyInstance:
    """A complete configuration small enough to enumerate exhaustively."""

    net: MultiplexNetwork
    x: np.ndarray             # (N, P)
    w: np.ndarray             # (N,)
    z: np.ndarray             # (L, N)
    rho: np.ndarray           # (M_z, M_z)
    gamma_prime: np.ndarray   # (M_w, M_z)
    phi: np.ndarray           # (M_w, P)
    phi0: np.ndarray          # (M_w, P)
    sigma2: np.ndarray        # (M_w,)
    hyper: Hyperparameters

    @property
    def m_w(self):
        return self.gamma_prime.shape[0]

    @property
    def m_z(self):
        return self.gamma_prime.shape[1]

    def params(self, w=None, z=None) -> JointParams:
        return JointParams(
            w=self.w if w is None else np.asarray(w),
            z=self.z if z is None else np.asarray(z),
            rho=self.rho, gamma_prime=self.gamma_prime, phi=self.phi,
            phi0=self.phi0, sigma2=self.sigma2)


def random_tiny_instance(rng, n=3, l=1, m_w=2, m_z=2, p=2,
                         hyper=None) -> TinyInstance:
    hyper = hyper or Hyperparameters()
    adjacency = (rng.random((l, n, n)) < rng.uniform(0.2, 0.7)).astype(np.int8)
    for i in range(n):
        adjacency[:, i, i] = 0
    return TinyInstance(
        net=MultiplexNetwork(adjacency),
        x=rng.normal(size=(n, p)),
        w=rng.integers(0, m_w, size=n),
        z=rng.integers(0, m_z, size=(l, n)),
        rho=rng.uniform(0.05, 0.95, size=(m_z, m_z)),
        gamma_prime=rng.uniform(0.1, 0.9, size=(m_w, m_z)),
        phi=rng.normal(size=(m_w, p)),
        phi0=rng.normal(size=(m_w, p)),
        sigma2=rng.uniform(0.3, 2.0, size=m_w),
        hyper=hyper)


def stick_gamma(gamma_prime: np.ndarray) -> np.ndarray:
    """Stick products gamma_ks = g'_ks prod_{r<s}(1 - g'_kr), loop form."""
    m_w, m_z = gamma_prime.shape
    out = np.zeros((m_w, m_z))
    for k in range(m_w):
        stick = 1.0
        for s in range(m_z):
            out[k, s] = gamma_prime[k, s] * stick
            stick *= 1.0 - gamma_prime[k, s]
    return out


def stick_tau(x_row: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Probit stick weights for one node, loop form, no remainder folding."""
    breaks = [float(ndtr(phi[k] @ x_row)) for k in range(phi.shape[0])]
    out = []
    stick = 1.0
    for b in breaks:
        out.append(b * stick)
        stick *= 1.0 - b
    return np.array(out)


# ---------------------------------------------------------------------------
# Complete conditionals (loop transcriptions of the conjugate forms)
# ---------------------------------------------------------------------------

def cond_z(inst: TinyInstance, ell: int, i: int) -> np.ndarray:
    gamma = stick_gamma(inst.gamma_prime)
    a = inst.net.adjacency[ell]
    weights = np.zeros(inst.m_z)
    for k in range(inst.m_z):
        value = gamma[inst.w[i], k]
        for j in range(inst.net.num_nodes):
            if j == i:
                continue
            m = inst.z[ell, j]
            value *= inst.rho[k, m] ** a[i, j] * (1 - inst.rho[k, m]) ** (1 - a[i, j])
            value *= inst.rho[m, k] ** a[j, i] * (1 - inst.rho[m, k]) ** (1 - a[j, i])
        weights[k] = value
    return weights / weights.sum()


def cond_w(inst: TinyInstance, i: int) -> np.ndarray:
    gamma = stick_gamma(inst.gamma_prime)
    tau = stick_tau(inst.x[i], inst.phi)
    weights = np.zeros(inst.m_w)
    for w in range(inst.m_w):
        value = tau[w]
        for ell in range(inst.net.num_layers):
            value *= gamma[w, inst.z[ell, i]]
        weights[w] = value
    return weights / weights.sum()


def cond_gamma(inst: TinyInstance, k: int, s: int) -> tuple[float, float]:
    hits = tails = 0
    for ell in range(inst.net.num_layers):
        for i in range(inst.net.num_nodes):
            if inst.w[i] == k:
                if inst.z[ell, i] == s:
                    hits += 1
                elif inst.z[ell, i] > s:
                    tails += 1
    return 1.0 + hits, inst.hyper.eta0 + tails


def cond_rho(inst: TinyInstance, k: int, m: int) -> tuple[float, float]:
    edges = holes = 0
    for ell in range(inst.net.num_layers):
        a = inst.net.adjacency[ell]
        for i in range(inst.net.num_nodes):
            for j in range(inst.net.num_nodes):
                if i != j and inst.z[ell, i] == k and inst.z[ell, j] == m:
                    edges += int(a[i, j])
                    holes += 1 - int(a[i, j])
    return inst.hyper.alpha0 + edges, inst.hyper.beta0 + holes


def cond_phi0(inst: TinyInstance, k: int) -> tuple[np.ndarray, float]:
    mu = inst.hyper.mean_vector(inst.x.shape[1])
    s2 = inst.sigma2[k]
    mean = (inst.phi[k] + s2 * mu) / (s2 + 1.0)
    return mean, s2 / (s2 + 1.0)


def cond_sigma2(inst: TinyInstance, k: int) -> tuple[float, float]:
    p = inst.x.shape[1]
    diff = inst.phi[k] - inst.phi0[k]
    return (inst.hyper.nu0 + p / 2.0,
            inst.hyper.omega0 + 0.5 * float(diff @ diff))


# ---------------------------------------------------------------------------
# Exhaustive discrete posterior
# ---------------------------------------------------------------------------

def brute_force_discrete_posterior(inst: TinyInstance):
    """Exact pmf over every (w, z) configuration via the log joint."""
    n, l = inst.net.num_nodes, inst.net.num_layers
    configs, logs = [], []
    w_space = itertools.product(range(inst.m_w), repeat=n)
    for w in w_space:
        for z_flat in itertools.product(range(inst.m_z), repeat=l * n):
            z = np.array(z_flat).reshape(l, n)
            configs.append((w, z_flat))
            logs.append(log_joint(inst.params(w=np.array(w), z=z),
                                  inst.net, inst.x, inst.hyper))
    logs = np.array(logs)
    logs -= logs.max()
    probs = np.exp(logs)
    probs /= probs.sum()
    return {cfg: prob for cfg, prob in zip(configs, probs)}


def conditional_from_posterior(pmf, inst: TinyInstance, kind, ell, i):
    """Slice the exhaustive pmf at the instance's labels, varying one site."""
    w_key = tuple(inst.w)
    z_key = tuple(inst.z.ravel())
    n = inst.net.num_nodes
    weights = []
    if kind == "z":
        site = ell * n + i
        for k in range(inst.m_z):
            z_mod = list(z_key)
            z_mod[site] = k
            weights.append(pmf[(w_key, tuple(z_mod))])
    else:
        for w_val in range(inst.m_w):
            w_mod = list(w_key)
            w_mod[i] = w_val
            weights.append(pmf[(tuple(w_mod), z_key)])
    weights = np.array(weights)
    return weights / weights.sum()


# ---------------------------------------------------------------------------
# Monte Carlo Gaussian expectations and model evidence
# ---------------------------------------------------------------------------

@dataclass
class McGaussResult:
    expectations: GaussExpectations
    standard_errors: GaussExpectations
    stein_vector: np.ndarray        # direct estimate of E[Sigma^-1 (phi-theta) h(s)]
    stein_vector_se: np.ndarray


def mc_gauss_expectations(x, theta, sigma_factor, n_samples, seed) -> McGaussResult:
    """Reparameterized Monte Carlo for all six log-probit expectations."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sigma_factor = np.asarray(sigma_factor, dtype=float)
    rng = np.random.default_rng(seed)
    p = theta.shape[0]
    xi = rng.normal(size=(n_samples, p))
    s = (theta @ x) + xi @ (sigma_factor.T @ x)
    h = log_ndtr(s)
    d1 = log_phi_ratio(s)
    d2 = -d1 * (s + d1)
    g = log_ndtr(-s)
    g1 = -log_phi_ratio(-s)
    g2 = g1 * (-s - g1)    # h''(-s) with h'(-s) = -g1
    root_n = np.sqrt(n_samples)

    def mean_se(v):
        return float(v.mean()), float(v.std(ddof=1) / root_n)

    stats = [mean_se(v) for v in (h, g, d1, g1, d2, g2)]
    # Sigma^-1 (phi - theta) = L^-T xi under phi = theta + L xi.
    linv_t_xi = np.linalg.solve(sigma_factor.T, xi.T).T
    stein = linv_t_xi * h[:, None]
    return McGaussResult(
        expectations=GaussExpectations(*(m for m, _ in stats)),
        standard_errors=GaussExpectations(*(se for _, se in stats)),
        stein_vector=stein.mean(axis=0),
        stein_vector_se=stein.std(axis=0, ddof=1) / root_n)


def mc_log_evidence(inst: TinyInstance, n_samples, seed):
    """Monte Carlo estimate of the truncated model's log evidence.

    Block probabilities and stick fractions integrate out in closed form
    given labels (conjugacy); the probit weight hierarchy is handled by
    ancestral prior sampling.  Returns (log evidence, worst-case log-scale
    standard error).
    """
    n, l = inst.net.num_nodes, inst.net.num_layers
    hyper = inst.hyper
    p = inst.x.shape[1]
    rng = np.random.default_rng(seed)
    mu = hyper.mean_vector(p)

    # Per w-configuration Monte Carlo of E[prod_i tau_{i, w_i}].
    sigma2 = 1.0 / rng.gamma(hyper.nu0, 1.0 / hyper.omega0,
                             size=(n_samples, inst.m_w))
    phi0 = mu + rng.normal(size=(n_samples, inst.m_w, p))
    phi = phi0 + np.sqrt(sigma2)[..., None] * rng.normal(size=(n_samples, inst.m_w, p))
    breaks = ndtr(np.einsum("skp,ip->sik", phi, inst.x))      # (S, N, M_w)
    sticks = np.ones_like(breaks)
    sticks[:, :, 1:] = np.cumprod(1.0 - breaks[:, :, :-1], axis=2)
    tau = breaks * sticks                                     # (S, N, M_w)

    w_configs = list(itertools.product(range(inst.m_w), repeat=n))
    tau_means, tau_ses = {}, {}
    for w in w_configs:
        prods = np.prod([tau[:, i, w[i]] for i in range(n)], axis=0)
        tau_means[w] = prods.mean()
        tau_ses[w] = prods.std(ddof=1) / np.sqrt(n_samples)

    def log_beta_ratio(a, b, a0, b0):
        return betaln(a, b) - betaln(a0, b0)

    total = 0.0
    se_sq = 0.0
    z_configs = list(itertools.product(range(inst.m_z), repeat=l * n))
    for w in w_configs:
        z_total = 0.0
        for z_flat in z_configs:
            z = np.array(z_flat).reshape(l, n)
            log_g = 0.0
            for k in range(inst.m_z):
                for m in range(inst.m_z):
                    edges = holes = 0
                    for ell in range(l):
                        for i in range(n):
                            for j in range(n):
                                if i != j and z[ell, i] == k and z[ell, j] == m:
                                    edges += int(inst.net.adjacency[ell, i, j])
                                    holes += 1 - int(inst.net.adjacency[ell, i, j])
                    log_g += log_beta_ratio(hyper.alpha0 + edges,
                                            hyper.beta0 + holes,
                                            hyper.alpha0, hyper.beta0)
            for k in range(inst.m_w):
                for s in range(inst.m_z):
                    hits = sum(1 for ell in range(l) for i in range(n)
                               if w[i] == k and z[ell, i] == s)
                    tails = sum(1 for ell in range(l) for i in range(n)
                                if w[i] == k and z[ell, i] > s)
                    log_g += log_beta_ratio(1.0 + hits, hyper.eta0 + tails,
                                            1.0, hyper.eta0)
            z_total += np.exp(log_g)
        total += tau_means[w] * z_total
        se_sq += (tau_ses[w] * z_total) ** 2
    return float(np.log(total)), float(np.sqrt(se_sq) / total)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def finite_diff(func, point, step=1e-5):
    """Central differences of a scalar function, per-coordinate scaled steps."""
    point = np.asarray(point, dtype=float)
    grad = np.zeros_like(point)
    it = np.nditer(point, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        h = step * max(1.0, abs(point[idx]))
        plus = point.copy()
        plus[idx] += h
        minus = point.copy()
        minus[idx] -= h
        grad[idx] = (func(plus) - func(minus)) / (2 * h)
        it.iternext()
    return grad


# ---------------------------------------------------------------------------
# Naive transcriptions of the variational updates and the ELBO
# ---------------------------------------------------------------------------

def _digs(a, b):
    return digamma(a) - digamma(a + b), digamma(b) - digamma(a + b)


def naive_update_rho(state: VariationalState, net, hyper):
    m_z = state.m_z
    a = np.full((m_z, m_z), hyper.alpha0)
    b = np.full((m_z, m_z), hyper.beta0)
    for ell in range(net.num_layers):
        for i in range(net.num_nodes):
            for j in range(net.num_nodes):
                if i == j:
                    continue
                for k in range(m_z):
                    for m in range(m_z):
                        mass = state.phi_z[ell, i, k] * state.phi_z[ell, j, m]
                        if net.adjacency[ell, i, j]:
                            a[k, m] += mass
                        else:
                            b[k, m] += mass
    return a, b


def naive_update_gamma(state: VariationalState, net, hyper):
    m_w, m_z = state.m_w, state.m_z
    a = np.ones((m_w, m_z))
    b = np.full((m_w, m_z), hyper.eta0)
    for k in range(m_w):
        for s in range(m_z):
            for ell in range(net.num_layers):
                for i in range(net.num_nodes):
                    a[k, s] += state.phi_z[ell, i, s] * state.phi_w[i, k]
                    for r in range(s + 1, m_z):
                        b[k, s] += state.phi_z[ell, i, r] * state.phi_w[i, k]
    return a, b


def _naive_gamma_profile(state):
    da, db = _digs(state.gamma_a, state.gamma_b)
    m_w, m_z = state.m_w, state.m_z
    profile = np.zeros((m_w, m_z))
    for w in range(m_w):
        for k in range(m_z):
            profile[w, k] = da[w, k] + sum(db[w, s] for s in range(k))
    return profile


def naive_update_z(state: VariationalState, net):
    """Snapshot transcription of the layer-membership update."""
    da, db = _digs(state.rho_a, state.rho_b)
    profile = _naive_gamma_profile(state)
    m_z = state.m_z
    new = np.zeros_like(state.phi_z)
    for ell in range(net.num_layers):
        a = net.adjacency[ell]
        for i in range(net.num_nodes):
            logs = np.zeros(m_z)
            for k in range(m_z):
                val = sum(state.phi_w[i, w] * profile[w, k] for w in range(state.m_w))
                for j in range(net.num_nodes):
                    if j == i:
                        continue
                    for s in range(m_z):
                        pj = state.phi_z[ell, j, s]
                        val += pj * (a[i, j] * da[k, s] + (1 - a[i, j]) * db[k, s])
                        val += pj * (a[j, i] * da[s, k] + (1 - a[j, i]) * db[s, k])
                logs[k] = val
            weights = np.exp(logs - logs.max())
            new[ell, i] = weights / weights.sum()
    return new


def naive_update_w(state: VariationalState, net, x_vals, quad):
    """Transcription of the global-membership update (shares quadrature)."""
    from muxblock.engine import expected_log_tau

    profile = _naive_gamma_profile(state)
    log_tau = expected_log_tau(state, x_vals, quad)
    new = np.zeros_like(state.phi_w)
    for i in range(net.num_nodes):
        logs = np.zeros(state.m_w)
        for w in range(state.m_w):
            val = log_tau[i, w]
            for ell in range(net.num_layers):
                for k in range(state.m_z):
                    val += state.phi_z[ell, i, k] * profile[w, k]
            logs[w] = val
        weights = np.exp(logs - logs.max())
        new[i] = weights / weights.sum()
    return new


def naive_elbo(state: VariationalState, net, x_vals, hyper, quad):
    """Loop transcription of the full evidence lower bound, constants included."""
    from muxblock.gaussian import h_moments

    n, l = net.num_nodes, net.num_layers
    m_w, m_z = state.m_w, state.m_z
    p = state.theta.shape[1]
    mu = hyper.mean_vector(p)
    sigma = state.sigma()
    da_r, db_r = _digs(state.rho_a, state.rho_b)
    da_g, db_g = _digs(state.gamma_a, state.gamma_b)
    total = 0.0

    for ell in range(l):
        a = net.adjacency[ell]
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                for k in range(m_z):
                    for m in range(m_z):
                        mass = state.phi_z[ell, i, k] * state.phi_z[ell, j, m]
                        term = da_r[k, m] if a[i, j] else db_r[k, m]
                        total += mass * term

    for k in range(m_z):
        for m in range(m_z):
            total += (hyper.alpha0 - 1) * da_r[k, m] + (hyper.beta0 - 1) * db_r[k, m]
            total -= betaln(hyper.alpha0, hyper.beta0)

    profile = _naive_gamma_profile(state)
    for ell in range(l):
        for i in range(n):
            for k in range(m_z):
                for w in range(m_w):
                    total += (state.phi_z[ell, i, k] * state.phi_w[i, w]
                              * profile[w, k])

    for i in range(n):
        for w in range(m_w):
            mean = float(x_vals[i] @ state.theta[w])
            var = float(x_vals[i] @ sigma[w] @ x_vals[i])
            e_h = float(h_moments(mean, var, quad)[0])
            val = e_h
            for k in range(w):
                mean_k = float(x_vals[i] @ state.theta[k])
                var_k = float(x_vals[i] @ sigma[k] @ x_vals[i])
                val += float(h_moments(-mean_k, var_k, quad)[0])
            total += state.phi_w[i, w] * val

    for k in range(m_w):
        e_log_s2 = np.log(state.omega[k]) - digamma(state.nu[k])
        e_inv_s2 = state.nu[k] / state.omega[k]
        diff = state.theta[k] - state.theta0[k]
        total += (-p / 2.0 * e_log_s2
                  - 0.5 * e_inv_s2 * (float(diff @ diff) + np.trace(sigma[k])
                                      + np.trace(state.sigma0[k]))
                  - p / 2.0 * np.log(2 * np.pi))
        diff0 = state.theta0[k] - mu
        total += (-0.5 * (float(diff0 @ diff0) + np.trace(state.sigma0[k]))
                  - p / 2.0 * np.log(2 * np.pi))
        total += (-(hyper.nu0 + 1) * e_log_s2 - hyper.omega0 * e_inv_s2
                  + hyper.nu0 * np.log(hyper.omega0) - gammaln(hyper.nu0))

    for k in range(m_w):
        for s in range(m_z):
            total += (hyper.eta0 - 1) * db_g[k, s] + np.log(hyper.eta0)

    # entropy side
    for resp in (state.phi_z.reshape(-1, m_z), state.phi_w):
        for row in resp:
            for cell in row:
                if cell > 0:
                    total -= cell * np.log(cell)
    for a_mat, b_mat, da, db in ((state.rho_a, state.rho_b, da_r, db_r),
                                 (state.gamma_a, state.gamma_b, da_g, db_g)):
        for a_val, b_val, da_val, db_val in zip(a_mat.ravel(), b_mat.ravel(),
                                                da.ravel(), db.ravel()):
            total -= (gammaln(a_val + b_val) - gammaln(a_val) - gammaln(b_val)
                      + (a_val - 1) * da_val + (b_val - 1) * db_val)
    for k in range(m_w):
        total -= -0.5 * np.linalg.slogdet(sigma[k])[1] - p / 2.0 * (np.log(2 * np.pi) + 1)
        total -= (-0.5 * np.linalg.slogdet(state.sigma0[k])[1]
                  - p / 2.0 * (np.log(2 * np.pi) + 1))
        total -= ((state.nu[k] + 1) * digamma(state.nu[k]) - np.log(state.omega[k])
                  - gammaln(state.nu[k]) - state.nu[k])
    return total


def log_joint_pieces(inst: TinyInstance) -> float:
    """Independent term-by-term log joint used to audit model.log_joint."""
    hyper = inst.hyper
    n, l = inst.net.num_nodes, inst.net.num_layers
    p = inst.x.shape[1]
    mu = hyper.mean_vector(p)
    gamma = stick_gamma(inst.gamma_prime)
    total = 0.0
    for ell in range(l):
        a = inst.net.adjacency[ell]
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                prob = inst.rho[inst.z[ell, i], inst.z[ell, j]]
                total += np.log(prob) if a[i, j] else np.log1p(-prob)
    for k in range(inst.m_z):
        for m in range(inst.m_z):
            total += ((hyper.alpha0 - 1) * np.log(inst.rho[k, m])
                      + (hyper.beta0 - 1) * np.log1p(-inst.rho[k, m])
                      - betaln(hyper.alpha0, hyper.beta0))
    for ell in range(l):
        for i in range(n):
            total += np.log(gamma[inst.w[i], inst.z[ell, i]])
    for i in range(n):
        total += np.log(stick_tau(inst.x[i], inst.phi)[inst.w[i]])
    for k in range(inst.m_w):
        diff = inst.phi[k] - inst.phi0[k]
        total += (-p / 2.0 * np.log(2 * np.pi * inst.sigma2[k])
                  - 0.5 * float(diff @ diff) / inst.sigma2[k])
        diff0 = inst.phi0[k] - mu
        total += -p / 2.0 * np.log(2 * np.pi) - 0.5 * float(diff0 @ diff0)
        total += (hyper.nu0 * np.log(hyper.omega0) - gammaln(hyper.nu0)
                  - (hyper.nu0 + 1) * np.log(inst.sigma2[k])
                  - hyper.omega0 / inst.sigma2[k])
        for s in range(inst.m_z):
            total += (np.log(hyper.eta0)
                      + (hyper.eta0 - 1) * np.log1p(-inst.gamma_prime[k, s]))
    return total


def random_valid_state(rng, n, l, m_w, m_z, p) -> VariationalState:
    """A random well-formed variational state for property tests."""
    from muxblock.gaussian import log_chol_from_sigma

    chol_log = []
    for _ in range(m_w):
        raw = rng.normal(size=(p, p)) * 0.3
        chol_log.append(log_chol_from_sigma(raw @ raw.T + np.eye(p) * rng.uniform(0.3, 1.5)))
    return VariationalState(
        phi_w=rng.dirichlet(np.ones(m_w), size=n),
        phi_z=rng.dirichlet(np.ones(m_z), size=(l, n)),
        rho_a=rng.uniform(0.3, 4.0, size=(m_z, m_z)),
        rho_b=rng.uniform(0.3, 4.0, size=(m_z, m_z)),
        gamma_a=rng.uniform(0.3, 4.0, size=(m_w, m_z)),
        gamma_b=rng.uniform(0.3, 4.0, size=(m_w, m_z)),
        theta=rng.normal(size=(m_w, p)),
        chol_log=np.stack(chol_log),
        theta0=rng.normal(size=(m_w, p)),
        sigma0=np.stack([np.eye(p) * rng.uniform(0.3, 1.5) for _ in range(m_w)]),
        nu=rng.uniform(1.0, 4.0, size=m_w),
        omega=rng.uniform(1.0, 4.0, size=m_w))
