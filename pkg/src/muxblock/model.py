"""Model types, stick-breaking constructions and the generative network sampler.

A multiplex network has L directed layers over a shared node set of size N.
Each node i carries a global group w_i drawn from covariate-dependent probit
stick-breaking probabilities tau_i; conditional on w_i, its layer-level group
z_{li} is drawn per layer from the global group's distribution gamma_{w_i};
edges are Bernoulli with block probabilities rho[z_{li}, z_{lj}].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln, log_ndtr, ndtr

from .errors import ValidationError


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass
class MultiplexNetwork:
    """Binary adjacency tensor of shape (L, N, N), directed, no self-loops."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ValidationError(f"adjacency must be (L, N, N), got {a.shape}")
        if not np.isin(a, (0, 1)).all():
            raise ValidationError("adjacency entries must be 0 or 1")
        if np.einsum("lii->li", a).any():
            raise ValidationError("self-loops are not allowed")
        self.adjacency = a.astype(np.int8)

    @property
    def num_layers(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[1]


@dataclass
class CovariateMatrix:
    """Nodal features, one row per node; intercept column flagged explicitly."""

    values: np.ndarray
    includes_intercept: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValidationError(f"covariates must be 2-d, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValidationError("covariates must be finite")
        self.values = v

    @property
    def num_features(self) -> int:
        return self.values.shape[1]


@dataclass
class Hyperparameters:
    """Prior hyperparameters; defaults are weak, proper and conjugacy-preserving."""

    alpha0: float = 1.0       # beta prior on block probabilities
    beta0: float = 1.0
    eta0: float = 1.0         # stick-breaking concentration
    nu0: float = 2.0          # inverse-gamma shape on probit weight variance
    omega0: float = 1.0       # inverse-gamma scale
    mu: np.ndarray | None = None  # prior mean of the top-level probit weights

    def __post_init__(self):
        for name in ("alpha0", "beta0", "eta0", "nu0", "omega0"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be strictly positive")
        if self.mu is not None:
            self.mu = np.asarray(self.mu, dtype=float)
            if not np.isfinite(self.mu).all():
                raise ValidationError("mu must be finite")

    def mean_vector(self, num_features: int) -> np.ndarray:
        """Prior mean resolved to length P (zeros when unset)."""
        if self.mu is None:
            return np.zeros(num_features)
        if self.mu.shape != (num_features,):
            raise ValidationError(
                f"mu has length {self.mu.shape[0]}, expected {num_features}")
        return self.mu


@dataclass
class TruncationConfig:
    """Finite caps on the global (m_w) and layer-level (m_z) group counts."""

    m_w: int
    m_z: int

    def __post_init__(self):
        if self.m_w < 1 or self.m_z < 1:
            raise ValidationError("truncations must be >= 1")


@dataclass
class GroundTruth:
    """Latents emitted by the sampler, kept for evaluation."""

    w: np.ndarray                      # (N,) global group labels
    z: np.ndarray                      # (L, N) layer group labels
    rho: np.ndarray                    # (K_z, K_z) block probabilities
    gamma: np.ndarray                  # (K_w, K_z) rows are probability vectors
    phi: np.ndarray | None = None      # (K_w, P) probit weights, covariate path only


# ---------------------------------------------------------------------------
# Stick-breaking
# ---------------------------------------------------------------------------

def stick_breaking_weights(breaks) -> tuple[np.ndarray, float]:
    """Turn break fractions in [0,1]^K into stick weights plus remainder mass.

    weight_s = breaks_s * prod_{r<s} (1 - breaks_r); the remainder is the
    unbroken stick, so weights sum to 1 - remainder exactly.
    """
    b = np.asarray(breaks, dtype=float)
    if b.ndim != 1:
        raise ValidationError("breaks must be a vector")
    if (b < 0).any() or (b > 1).any():
        raise ValidationError("breaks must lie in [0, 1]")
    stick = np.concatenate(([1.0], np.cumprod(1.0 - b)))
    return b * stick[:-1], float(stick[-1])


def probit_stick_probs(x, phi) -> tuple[np.ndarray, float]:
    """Stick weights with breaks Phi(x . phi_k) for each weight row phi_k."""
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or x.shape != (phi.shape[1],):
        raise ValidationError(
            f"covariate row {x.shape} incompatible with weights {phi.shape}")
    return stick_breaking_weights(ndtr(phi @ x))


def fold_remainder(weights: np.ndarray, remainder: float) -> np.ndarray:
    """Absorb leftover stick mass into the final component."""
    out = np.array(weights, dtype=float)
    out[-1] += remainder
    return out


# ---------------------------------------------------------------------------
# Generative sampler
# ---------------------------------------------------------------------------

def _validate_probability_rows(gamma: np.ndarray):
    if (gamma < 0).any() or not np.allclose(gamma.sum(axis=1), 1.0, atol=1e-8):
        raise ValidationError("gamma rows must be probability vectors")


def sample_network(num_nodes, num_layers, *, rho, gamma, w=None,
                   covariates=None, phi=None, seed=0):
    """Draw one multiplex network from the generative model.

    Exactly one of two specifications must be given:
      * explicit: ``w`` fixes each node's global group;
      * covariate-driven: ``covariates`` (N, P) and ``phi`` (K_w, P) define
        probit stick probabilities tau_i from which w_i is drawn.

    Layer memberships z_{li} ~ Categorical(gamma[w_i]) independently per
    layer, then A_{lij} ~ Bernoulli(rho[z_{li}, z_{lj}]) for i != j.  A single
    seed expands into one stream for the global draws plus one independent
    stream per layer (numpy SeedSequence spawning), so per-layer generation
    is order-independent.
    """
    rho = np.asarray(rho, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if (rho < 0).any() or (rho > 1).any():
        raise ValidationError("rho entries must lie in [0, 1]")
    _validate_probability_rows(gamma)
    if gamma.shape[1] != rho.shape[0] or rho.shape[0] != rho.shape[1]:
        raise ValidationError("gamma columns must index the square rho matrix")

    root = np.random.SeedSequence(seed)
    global_ss, *layer_ss = root.spawn(num_layers + 1)
    global_rng = np.random.default_rng(global_ss)

    if w is not None:
        if covariates is not None or phi is not None:
            raise ValidationError("give either explicit w or covariates+phi, not both")
        w = np.asarray(w, dtype=int)
        if w.shape != (num_nodes,) or (w < 0).any() or (w >= gamma.shape[0]).any():
            raise ValidationError("w labels must index gamma rows")
        phi_used = None
    else:
        if covariates is None or phi is None:
            raise ValidationError("covariate-driven sampling needs covariates and phi")
        x_vals = covariates.values if isinstance(covariates, CovariateMatrix) else np.asarray(covariates, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if phi.shape[0] != gamma.shape[0]:
            raise ValidationError("phi rows must match gamma rows")
        if x_vals.shape != (num_nodes, phi.shape[1]):
            raise ValidationError("covariates must be (num_nodes, P) matching phi")
        breaks = ndtr(x_vals @ phi.T)                       # (N, K_w)
        w = np.empty(num_nodes, dtype=int)
        for i in range(num_nodes):
            weights, rem = stick_breaking_weights(breaks[i])
            w[i] = global_rng.choice(gamma.shape[0], p=fold_remainder(weights, rem))
        phi_used = phi

    z = np.empty((num_layers, num_nodes), dtype=int)
    adjacency = np.zeros((num_layers, num_nodes, num_nodes), dtype=np.int8)
    for ell, ss in enumerate(layer_ss):
        rng = np.random.default_rng(ss)
        cum = np.cumsum(gamma[w], axis=1)
        u = rng.random(num_nodes)
        z[ell] = (u[:, None] > cum).sum(axis=1).clip(max=gamma.shape[1] - 1)
        block = rho[np.ix_(z[ell], z[ell])]
        a = (rng.random((num_nodes, num_nodes)) < block).astype(np.int8)
        np.fill_diagonal(a, 0)
        adjacency[ell] = a

    net = MultiplexNetwork(adjacency)
    truth = GroundTruth(w=w, z=z, rho=rho, gamma=gamma, phi=phi_used)
    return net, truth


# ---------------------------------------------------------------------------
# Log joint density of a fully specified configuration
# ---------------------------------------------------------------------------

@dataclass
class JointParams:
    """A complete latent configuration for log_joint (labels + point values)."""

    w: np.ndarray              # (N,)
    z: np.ndarray              # (L, N)
    rho: np.ndarray            # (M_z, M_z) in (0, 1)
    gamma_prime: np.ndarray    # (M_w, M_z) stick-break fractions in (0, 1)
    phi: np.ndarray            # (M_w, P)
    phi0: np.ndarray           # (M_w, P)
    sigma2: np.ndarray         # (M_w,) positive


def _xlogy(x, logy):
    """x * logy with the 0 * (-inf) = 0 convention."""
    with np.errstate(invalid="ignore"):
        return np.where(x == 0, 0.0, x * logy)


def log_joint(params: JointParams, net: MultiplexNetwork,
              X: CovariateMatrix | np.ndarray, hyper: Hyperparameters) -> float:
    """Log joint density of labels, parameters and data, truncated at (M_w, M_z).

    All normalization constants are included.  A zero probability paired with
    a positive count yields -inf rather than raising.
    """
    x_vals = X.values if isinstance(X, CovariateMatrix) else np.asarray(X, dtype=float)
    a = net.adjacency
    num_layers, num_nodes = net.num_layers, net.num_nodes
    m_w, m_z = params.gamma_prime.shape
    num_feat = x_vals.shape[1]
    mu = hyper.mean_vector(num_feat)

    w, z = params.w, params.z
    with np.errstate(divide="ignore"):
        log_rho = np.log(params.rho)
        log_1m_rho = np.log1p(-params.rho)
        log_gp = np.log(params.gamma_prime)
        log_1m_gp = np.log1p(-params.gamma_prime)

    total = 0.0
    # Edges: A_{lij} ~ Bernoulli(rho[z_li, z_lj]) over ordered pairs i != j.
    offdiag = ~np.eye(num_nodes, dtype=bool)
    for ell in range(num_layers):
        lr = log_rho[np.ix_(z[ell], z[ell])]
        l1r = log_1m_rho[np.ix_(z[ell], z[ell])]
        al = a[ell]
        total += _xlogy(al, lr)[offdiag].sum() + _xlogy(1 - al, l1r)[offdiag].sum()

    # Beta priors on rho.
    total += (_xlogy(np.full_like(log_rho, hyper.alpha0 - 1), log_rho)
              + _xlogy(np.full_like(log_1m_rho, hyper.beta0 - 1), log_1m_rho)).sum()
    total -= m_z * m_z * betaln(hyper.alpha0, hyper.beta0)

    # Layer memberships: log gamma_{w_i, z_li} via the stick representation.
    lead = np.concatenate([np.zeros((m_w, 1)), np.cumsum(log_1m_gp, axis=1)[:, :-1]],
                          axis=1)
    log_gamma = log_gp + lead                         # (M_w, M_z)
    total += log_gamma[w[None, :].repeat(num_layers, 0), z].sum()

    # Global memberships: log tau_{i, w_i} from probit sticks.
    proj = x_vals @ params.phi.T                      # (N, M_w)
    log_break = log_ndtr(proj)
    log_keep = log_ndtr(-proj)
    lead_w = np.concatenate([np.zeros((num_nodes, 1)),
                             np.cumsum(log_keep, axis=1)[:, :-1]], axis=1)
    total += (log_break + lead_w)[np.arange(num_nodes), w].sum()

    # Gaussian priors on probit weights and their means.
    diff = params.phi - params.phi0
    total += (-0.5 * num_feat * np.log(2 * np.pi * params.sigma2)
              - 0.5 * (diff ** 2).sum(axis=1) / params.sigma2).sum()
    diff0 = params.phi0 - mu
    total += (-0.5 * num_feat * np.log(2 * np.pi)
              - 0.5 * (diff0 ** 2).sum(axis=1)).sum()

    # Inverse-gamma prior on the weight variances.
    total += (hyper.nu0 * np.log(hyper.omega0) - gammaln(hyper.nu0)
              - (hyper.nu0 + 1) * np.log(params.sigma2)
              - hyper.omega0 / params.sigma2).sum()

    # GEM stick fractions: Beta(1, eta0).
    total += m_w * m_z * np.log(hyper.eta0)
    total += _xlogy(np.full_like(log_1m_gp, hyper.eta0 - 1), log_1m_gp).sum()

    return float(total) if np.isfinite(total) else float("-inf")
