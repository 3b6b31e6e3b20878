"""Truncated mean-field variational inference engine.

The variational family is factorized: categorical responsibilities for global
and layer-level memberships, beta factors for block probabilities and stick
fractions, Gaussians for the probit weight vectors and their means (with the
weight covariances carried in log-Cholesky form), and inverse-gamma factors
for the weight variances.  All factors except the probit weights have
closed-form coordinate updates; the weight means and covariances are moved by
Adam steps on analytic ELBO gradients, with best-value tracking and moment
state that persists across outer sweeps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import betaln, digamma, gammaln, log_ndtr

from .errors import ValidationError
from .gaussian import chol_from_log, grad_log_chol, h_moments, hermgauss
from .model import CovariateMatrix, Hyperparameters, MultiplexNetwork

_LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# State containers
# ---------------------------------------------------------------------------

@dataclass
class VariationalState:
    """All variational parameters at truncations (M_w, M_z).

    Covariances of the probit weights are stored as log-Cholesky factors
    ``chol_log`` (one P x P lower triangle per global group), which keeps any
    reconstructed covariance SPD by construction.
    """

    phi_w: np.ndarray        # (N, M_w) responsibilities over global groups
    phi_z: np.ndarray        # (L, N, M_z) responsibilities over layer groups
    rho_a: np.ndarray        # (M_z, M_z) beta shapes for block probabilities
    rho_b: np.ndarray
    gamma_a: np.ndarray      # (M_w, M_z) beta shapes for stick fractions
    gamma_b: np.ndarray
    theta: np.ndarray        # (M_w, P) probit weight means
    chol_log: np.ndarray     # (M_w, P, P) log-Cholesky factors of the covariances
    theta0: np.ndarray       # (M_w, P) means of the weight-mean factors
    sigma0: np.ndarray       # (M_w, P, P) covariances of the weight-mean factors
    nu: np.ndarray           # (M_w,) inverse-gamma shapes
    omega: np.ndarray        # (M_w,) inverse-gamma scales

    @property
    def m_w(self) -> int:
        return self.phi_w.shape[1]

    @property
    def m_z(self) -> int:
        return self.phi_z.shape[2]

    @property
    def num_features(self) -> int:
        return self.theta.shape[1]

    def chol(self) -> np.ndarray:
        """Stack of lower-triangular Cholesky factors L_k."""
        return np.stack([chol_from_log(b) for b in self.chol_log])

    def sigma(self) -> np.ndarray:
        """Stack of reconstructed covariance matrices L_k L_k'."""
        ls = self.chol()
        return ls @ ls.transpose(0, 2, 1)

    def copy(self) -> "VariationalState":
        return VariationalState(**{k: np.array(v) for k, v in self.__dict__.items()})

    def validate(self, net: MultiplexNetwork | None = None):
        for name in ("phi_w", "phi_z"):
            resp = getattr(self, name)
            if (resp < 0).any() or not np.allclose(
                    resp.sum(axis=-1), 1.0, atol=1e-8):
                raise ValidationError(f"{name} rows must be probability vectors")
        for name in ("rho_a", "rho_b", "gamma_a", "gamma_b", "nu", "omega"):
            if (getattr(self, name) <= 0).any():
                raise ValidationError(f"{name} must be strictly positive")
        if self.gamma_a.shape != (self.m_w, self.m_z):
            raise ValidationError("gamma shapes inconsistent with truncations")
        if net is not None and (
                self.phi_w.shape[0] != net.num_nodes
                or self.phi_z.shape[:2] != (net.num_layers, net.num_nodes)):
            raise ValidationError("responsibility shapes do not match the network")


@dataclass
class AdamState:
    """Adam moments for one parameter block, with bias-corrected stepping."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, shape, **kwargs) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), **kwargs)

    def copy(self) -> "AdamState":
        return replace(self, first_moment=self.first_moment.copy(),
                       second_moment=self.second_moment.copy())


def adam_step(param: np.ndarray, grad: np.ndarray,
              state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam step; ``grad`` is the descent direction."""
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    new_param = param - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_param, replace(state, first_moment=m, second_moment=v, step_count=t)


@dataclass
class FitConfig:
    """Knobs for the fit loop; defaults follow the documented conventions."""

    m_w: int
    m_z: int
    max_iter: int = 100
    tol: float = 1e-6                # relative ELBO change declaring convergence
    lr_theta: float = 0.05
    lr_sigma: float = 0.05
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_steps: int = 30              # gradient steps per variable per sweep
    max_decreases: int = 5           # tolerated objective decreases per phase
    quad_points: int = 32
    mc_samples: int = 200_000        # oracle cross-checks only
    seed: int = 0

    def __post_init__(self):
        if min(self.m_w, self.m_z, self.max_iter, self.quad_points) < 1:
            raise ValidationError("counts must be positive")
        if self.tol <= 0:
            raise ValidationError("tolerance must be positive")


@dataclass
class FitReport:
    """Diagnostics from one fit."""

    elbo_trace: list[float] = field(default_factory=list)
    converged: bool = False
    num_sweeps: int = 0
    runtime_seconds: float = 0.0
    sweep_seconds: list[float] = field(default_factory=list)
    occupied_global: int = 0
    occupied_layer: int = 0
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------

def _covariate_values(X) -> np.ndarray:
    return X.values if isinstance(X, CovariateMatrix) else np.asarray(X, dtype=float)


def _beta_digammas(a, b):
    """(E[log p], E[log(1-p)]) under Beta(a, b), elementwise."""
    total = digamma(a + b)
    return digamma(a) - total, digamma(b) - total


def _shifted_cumsum(arr, axis=-1):
    """Exclusive prefix sums along ``axis`` (zeros in the first slot)."""
    out = np.cumsum(arr, axis=axis)
    out = np.roll(out, 1, axis=axis)
    idx = [slice(None)] * arr.ndim
    idx[axis] = 0
    out[tuple(idx)] = 0.0
    return out


def _suffix_sum_excl(arr, axis=-1):
    """Exclusive suffix sums along ``axis`` (zeros in the last slot)."""
    rev = np.flip(arr, axis=axis)
    return np.flip(_shifted_cumsum(rev, axis=axis), axis=axis)


def gamma_profile(gamma_a, gamma_b) -> np.ndarray:
    """Expected log stick weight: E[log gamma'_{wk}] + sum_{s<k} E[log(1-gamma'_{ws})]."""
    da, db = _beta_digammas(gamma_a, gamma_b)
    return da + _shifted_cumsum(db, axis=1)


def _projected_moments(x_vals, theta, chol_stack):
    """Per-node mean and variance of x_i . phi_k for every global group k."""
    means = x_vals @ theta.T
    variances = np.stack(
        [((x_vals @ chol_stack[k]) ** 2).sum(axis=1) for k in range(theta.shape[0])],
        axis=1)
    return means, variances


def probit_log_moments(state: VariationalState, x_vals, quad):
    """E[log Phi] and E[log(1 - Phi)] of the projections, both (N, M_w)."""
    means, variances = _projected_moments(x_vals, state.theta, state.chol())
    eh = h_moments(means, variances, quad)[0]
    eg = h_moments(-means, variances, quad)[0]
    return eh, eg


def expected_log_tau(state: VariationalState, X, quad) -> np.ndarray:
    """E[log tau_{iw}] for every node and global group, shape (N, M_w)."""
    eh, eg = probit_log_moments(state, _covariate_values(X), quad)
    return eh + _shifted_cumsum(eg, axis=1)


def _normalize_log_rows(log_resp):
    log_resp = log_resp - log_resp.max(axis=-1, keepdims=True)
    resp = np.exp(log_resp)
    return resp / resp.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Closed-form coordinate updates
# ---------------------------------------------------------------------------

def update_w(state: VariationalState, net: MultiplexNetwork, X, quad) -> np.ndarray:
    """Responsibilities over global groups, rows normalized in log space."""
    profile = gamma_profile(state.gamma_a, state.gamma_b)      # (M_w, M_z)
    log_resp = state.phi_z.sum(axis=0) @ profile.T             # (N, M_w)
    log_resp += expected_log_tau(state, X, quad)
    return _normalize_log_rows(log_resp)


def update_z(state: VariationalState, net: MultiplexNetwork) -> np.ndarray:
    """Responsibilities over layer groups.

    Every row is recomputed from the same entry snapshot, so rows may be
    filled in any order (or concurrently) with identical results.
    """
    da, db = _beta_digammas(state.rho_a, state.rho_b)
    d_edge = da - db
    prior = state.phi_w @ gamma_profile(state.gamma_a, state.gamma_b)  # (N, M_z)
    new = np.empty_like(state.phi_z)
    for ell in range(net.num_layers):
        a = net.adjacency[ell].astype(float)
        p = state.phi_z[ell]
        others = p.sum(axis=0) - p
        out_edges = a @ p
        in_edges = a.T @ p
        log_resp = (prior
                    + out_edges @ d_edge.T + others @ db.T
                    + in_edges @ d_edge + others @ db)
        new[ell] = _normalize_log_rows(log_resp)
    return new


def update_rho(state: VariationalState, net: MultiplexNetwork,
               hyper: Hyperparameters) -> tuple[np.ndarray, np.ndarray]:
    """Beta shapes for block probabilities from expected edge/non-edge counts."""
    m_z = state.m_z
    edges = np.zeros((m_z, m_z))
    pairs = np.zeros((m_z, m_z))
    for ell in range(net.num_layers):
        p = state.phi_z[ell]
        a = net.adjacency[ell].astype(float)
        edges += p.T @ a @ p
        totals = p.sum(axis=0)
        pairs += np.outer(totals, totals) - p.T @ p
    return hyper.alpha0 + edges, hyper.beta0 + pairs - edges


def update_gamma(state: VariationalState,
                 hyper: Hyperparameters) -> tuple[np.ndarray, np.ndarray]:
    """Beta shapes for stick fractions; the second shape carries the tail mass."""
    counts = state.phi_w.T @ state.phi_z.sum(axis=0)           # (M_w, M_z)
    return 1.0 + counts, hyper.eta0 + _suffix_sum_excl(counts, axis=1)


def update_phi0(state: VariationalState,
                hyper: Hyperparameters) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian factors for the probit weight means."""
    p = state.num_features
    mu = hyper.mean_vector(p)
    weight = state.nu + state.omega
    theta0 = (state.nu[:, None] * state.theta + state.omega[:, None] * mu) / weight[:, None]
    scale = state.omega / weight
    sigma0 = scale[:, None, None] * np.eye(p)
    return theta0, sigma0


def update_sigma2(state: VariationalState,
                  hyper: Hyperparameters) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-gamma factors for the probit weight variances."""
    p = state.num_features
    nu = np.full(state.m_w, hyper.nu0 + p / 2.0)
    ls = state.chol()
    tr_sigma = (ls ** 2).sum(axis=(1, 2))
    tr_sigma0 = np.trace(state.sigma0, axis1=1, axis2=2)
    sq = ((state.theta - state.theta0) ** 2).sum(axis=1)
    omega = hyper.omega0 + 0.5 * (sq + tr_sigma + tr_sigma0)
    return nu, omega


# ---------------------------------------------------------------------------
# Probit weight gradients and component objective
# ---------------------------------------------------------------------------

def _tail_weights(phi_w) -> np.ndarray:
    """sum_{m>k} phi_w[:, m] for each k; weights on the log(1-Phi) terms."""
    return _suffix_sum_excl(phi_w, axis=1)


def _phi_point_eval(theta_k, chol_log_k, resp_k, tail_k, x_vals,
                    nu_k, omega_k, theta0_k, quad, need=None):
    """Component objective and, optionally, one gradient, in a single pass.

    One quadrature grid per sign serves the objective and both gradients, so
    optimizer steps cost a single transcendental sweep.  ``need`` selects the
    returned gradient: "theta", "sigma" (symmetric matrix), "chol"
    (log-Cholesky chain rule), or None.
    """
    nodes, weights = quad
    l_k = chol_from_log(chol_log_k)
    means = x_vals @ theta_k
    root = np.sqrt(2.0 * ((x_vals @ l_k) ** 2).sum(axis=1))
    s_pos = means[:, None] + root[:, None] * nodes
    s_neg = -means[:, None] + root[:, None] * nodes
    h_pos = log_ndtr(s_pos)
    h_neg = log_ndtr(s_neg)
    value = float(resp_k @ (h_pos @ weights) + tail_k @ (h_neg @ weights))
    diff = theta_k - theta0_k
    value -= 0.5 * (nu_k / omega_k) * (float(diff @ diff) + float((l_k ** 2).sum()))
    value += float(np.diagonal(chol_log_k).sum())   # 0.5 * logdet(Sigma_k)
    if need is None:
        return value, None

    d1_pos = np.exp(-0.5 * s_pos * s_pos - 0.5 * _LOG_2PI - h_pos)
    d1_neg = np.exp(-0.5 * s_neg * s_neg - 0.5 * _LOG_2PI - h_neg)
    if need == "theta":
        node_weights = resp_k * (d1_pos @ weights) - tail_k * (d1_neg @ weights)
        grad = x_vals.T @ node_weights - (nu_k / omega_k) * diff
        return value, grad

    # Second s-derivative expectations as variance-derivatives of the
    # quadratured first moment (exact gradients of `value` in the covariance).
    p = theta_k.shape[0]
    weighted_nodes = weights * nodes
    safe_root = np.where(root > 0, root, 1.0)
    e_d2_pos = np.where(root > 0, 2.0 * (d1_pos @ weighted_nodes) / safe_root,
                        (-d1_pos * (s_pos + d1_pos)) @ weights)
    e_d2_neg = np.where(root > 0, 2.0 * (d1_neg @ weighted_nodes) / safe_root,
                        (-d1_neg * (s_neg + d1_neg)) @ weights)
    node_weights = resp_k * e_d2_pos + tail_k * e_d2_neg
    grad = 0.5 * (x_vals * node_weights[:, None]).T @ x_vals
    grad -= (nu_k / (2.0 * omega_k)) * np.eye(p)
    grad += 0.5 * cho_solve((l_k, True), np.eye(p))
    if need == "chol":
        grad = grad_log_chol(grad, chol_log_k)
    return value, grad


def _phi_eval_args(k: int, state: VariationalState, X):
    x_vals = _covariate_values(X)
    return dict(resp_k=state.phi_w[:, k], tail_k=_tail_weights(state.phi_w)[:, k],
                x_vals=x_vals, nu_k=state.nu[k], omega_k=state.omega[k],
                theta0_k=state.theta0[k])


def grad_theta(k: int, state: VariationalState, X, quad) -> np.ndarray:
    """ELBO gradient in the k-th probit weight mean."""
    return _phi_point_eval(state.theta[k], state.chol_log[k],
                           quad=quad, need="theta", **_phi_eval_args(k, state, X))[1]


def grad_sigma(k: int, state: VariationalState, X, quad) -> np.ndarray:
    """ELBO gradient in the k-th probit weight covariance (symmetric P x P)."""
    return _phi_point_eval(state.theta[k], state.chol_log[k],
                           quad=quad, need="sigma", **_phi_eval_args(k, state, X))[1]


def grad_chol_log(k: int, state: VariationalState, X, quad) -> np.ndarray:
    """Covariance gradient pushed through the log-Cholesky chain rule."""
    return _phi_point_eval(state.theta[k], state.chol_log[k],
                           quad=quad, need="chol", **_phi_eval_args(k, state, X))[1]


def phi_component_objective(k: int, theta_k, chol_log_k,
                            state: VariationalState, X, quad) -> float:
    """ELBO terms that involve the k-th probit weight factor only.

    The full ELBO differs from this by a quantity constant in
    (theta_k, Sigma_k), so gradient-phase comparisons can use it directly.
    """
    return _phi_point_eval(theta_k, chol_log_k, quad=quad,
                           **_phi_eval_args(k, state, X))[0]


# ---------------------------------------------------------------------------
# ELBO
# ---------------------------------------------------------------------------

def _entropy_sum(resp) -> float:
    """sum p log p with the 0 log 0 = 0 convention."""
    return float(np.where(resp > 0, resp * np.log(np.where(resp > 0, resp, 1.0)), 0.0).sum())


def elbo(state: VariationalState, net: MultiplexNetwork, X,
         hyper: Hyperparameters, quad, *, sigma_override=None) -> float:
    """Evidence lower bound of the current state, all constants included.

    ``sigma_override`` substitutes an explicit covariance stack for the
    reconstructed one; finite-difference tests perturb covariances directly
    through it.
    """
    x_vals = _covariate_values(X)
    num_layers, num_nodes = net.num_layers, net.num_nodes
    m_w, m_z = state.m_w, state.m_z
    p = state.num_features
    mu = hyper.mean_vector(p)
    sigma = state.sigma() if sigma_override is None else np.asarray(sigma_override)

    da_r, db_r = _beta_digammas(state.rho_a, state.rho_b)
    da_g, db_g = _beta_digammas(state.gamma_a, state.gamma_b)
    profile = da_g + _shifted_cumsum(db_g, axis=1)

    total = 0.0

    # Expected Bernoulli log-likelihood over ordered node pairs.
    for ell in range(num_layers):
        resp = state.phi_z[ell]
        a = net.adjacency[ell].astype(float)
        edges = resp.T @ a @ resp
        totals = resp.sum(axis=0)
        pairs = np.outer(totals, totals) - resp.T @ resp
        total += float((edges * da_r).sum() + ((pairs - edges) * db_r).sum())

    # Beta prior on block probabilities.
    total += float(((hyper.alpha0 - 1) * da_r + (hyper.beta0 - 1) * db_r).sum())
    total -= m_z * m_z * betaln(hyper.alpha0, hyper.beta0)

    # Layer memberships given global groups.
    counts = state.phi_w.T @ state.phi_z.sum(axis=0)
    total += float((counts * profile).sum())

    # Global memberships given probit weights.
    means = x_vals @ state.theta.T
    variances = np.stack([((x_vals * (x_vals @ sigma[k])).sum(axis=1))
                          for k in range(m_w)], axis=1)
    variances = np.maximum(variances, 0.0)
    eh = h_moments(means, variances, quad)[0]
    eg = h_moments(-means, variances, quad)[0]
    total += float((state.phi_w * (eh + _shifted_cumsum(eg, axis=1))).sum())

    # Probit weight prior around its mean factor.
    e_log_sigma2 = np.log(state.omega) - digamma(state.nu)
    e_inv_sigma2 = state.nu / state.omega
    tr_sigma = np.trace(sigma, axis1=1, axis2=2)
    tr_sigma0 = np.trace(state.sigma0, axis1=1, axis2=2)
    sq = ((state.theta - state.theta0) ** 2).sum(axis=1)
    total += float((-0.5 * p * e_log_sigma2
                    - 0.5 * e_inv_sigma2 * (sq + tr_sigma + tr_sigma0)).sum())
    total -= m_w * 0.5 * p * _LOG_2PI

    # Weight-mean prior.
    sq0 = ((state.theta0 - mu) ** 2).sum(axis=1)
    total += float((-0.5 * (sq0 + tr_sigma0)).sum())
    total -= m_w * 0.5 * p * _LOG_2PI

    # Variance prior.
    total += float((-(hyper.nu0 + 1) * e_log_sigma2
                    - hyper.omega0 * e_inv_sigma2).sum())
    total += m_w * (hyper.nu0 * np.log(hyper.omega0) - gammaln(hyper.nu0))

    # Stick fraction prior.
    total += float(((hyper.eta0 - 1) * db_g).sum())
    total += m_w * m_z * np.log(hyper.eta0)

    # --- entropy side: subtract E[log q] ---
    total -= _entropy_sum(state.phi_z)
    total -= _entropy_sum(state.phi_w)

    def beta_e_log_q(a, b, da, db):
        return float((gammaln(a + b) - gammaln(a) - gammaln(b)
                      + (a - 1) * da + (b - 1) * db).sum())

    total -= beta_e_log_q(state.rho_a, state.rho_b, da_r, db_r)
    total -= beta_e_log_q(state.gamma_a, state.gamma_b, da_g, db_g)

    sign, logdet = np.linalg.slogdet(sigma)
    if (sign <= 0).any():
        raise ValidationError("covariance stack must be positive definite")
    sign0, logdet0 = np.linalg.slogdet(state.sigma0)
    total -= float((-0.5 * logdet).sum()) - m_w * 0.5 * p * (_LOG_2PI + 1)
    total -= float((-0.5 * logdet0).sum()) - m_w * 0.5 * p * (_LOG_2PI + 1)
    total -= float(((state.nu + 1) * digamma(state.nu) - np.log(state.omega)
                    - gammaln(state.nu) - state.nu).sum())

    return total


# ---------------------------------------------------------------------------
# Per-component Adam optimization (theta first, then the covariance factor)
# ---------------------------------------------------------------------------

def optimize_phi_component(k: int, state: VariationalState, X,
                           config: FitConfig, quad,
                           adam_theta: AdamState, adam_chol: AdamState,
                           warnings: list[str]) -> tuple[AdamState, AdamState]:
    """Gradient phase for one global group; mutates state.theta[k]/chol_log[k].

    The mean is optimized first at fixed covariance, then the covariance at
    the best mean.  Tracks the best objective seen; walkers keep their Adam
    momentum across rejected steps, but only the moments at the best point
    are checkpointed for the next sweep.  A phase exits after
    ``max_decreases + 1`` rejections or ``max_steps`` steps, whichever comes
    first.  A phase that accepts nothing discards its checkpointed moments:
    the stale warm start provably points away from ascent there, and because
    checkpoints only update on improvement it would otherwise replay the
    same rejected walk every sweep.
    """
    shared = _phi_eval_args(k, state, X)

    def run_phase(param, fixed, need, walker, saved):
        best = param.copy()
        curr = param.copy()
        if need == "theta":
            best_obj, grad = _phi_point_eval(curr, fixed, quad=quad, need=need, **shared)
        else:
            best_obj, grad = _phi_point_eval(fixed, curr, quad=quad, need=need, **shared)
        decreases = 0
        accepted = 0
        for _ in range(config.max_steps):
            if not np.isfinite(grad).all():
                warnings.append(f"non-finite gradient for group {k}; phase aborted")
                break
            curr, walker = adam_step(curr, -grad, walker)
            if need == "theta":
                obj, grad = _phi_point_eval(curr, fixed, quad=quad, need=need, **shared)
            else:
                obj, grad = _phi_point_eval(fixed, curr, quad=quad, need=need, **shared)
            if obj > best_obj:
                best_obj = obj
                best = curr.copy()
                saved = walker.copy()
                decreases = 0
                accepted += 1
            else:
                decreases += 1
                if decreases > config.max_decreases:
                    break
        if accepted == 0 and config.max_steps > 0:
            saved = replace(saved,
                            first_moment=np.zeros_like(saved.first_moment),
                            second_moment=np.zeros_like(saved.second_moment),
                            step_count=0)
        return best, saved

    state.theta[k], adam_theta = run_phase(
        state.theta[k], state.chol_log[k], "theta", adam_theta.copy(), adam_theta)
    state.chol_log[k], adam_chol = run_phase(
        state.chol_log[k], state.theta[k], "chol", adam_chol.copy(), adam_chol)
    return adam_theta, adam_chol


# ---------------------------------------------------------------------------
# Fit loop
# ---------------------------------------------------------------------------

def _occupied_counts(state: VariationalState) -> tuple[int, int]:
    global_labels = state.phi_w.argmax(axis=1)
    layer_labels = state.phi_z.argmax(axis=2)
    return int(np.unique(global_labels).size), int(np.unique(layer_labels).size)


def fit(net: MultiplexNetwork, X, hyper: Hyperparameters, config: FitConfig,
        state: VariationalState) -> tuple[VariationalState, FitReport]:
    """Run the full coordinate-ascent sweep until the ELBO stabilizes.

    Sweep order: block probabilities, stick fractions, weight-mean factors,
    per-group weight factors (mean then covariance, by Adam), weight
    variances, layer memberships, global memberships.
    """
    state = state.copy()
    state.validate(net)
    x_vals = _covariate_values(X)
    if x_vals.shape != (net.num_nodes, state.num_features):
        raise ValidationError("covariate shape does not match network/state")
    quad = hermgauss(config.quad_points)
    report = FitReport()
    start = time.perf_counter()

    adam_kwargs = dict(beta1=config.adam_beta1, beta2=config.adam_beta2,
                       epsilon=config.adam_eps)
    theta_adams = [AdamState.zeros(state.num_features,
                                   learning_rate=config.lr_theta, **adam_kwargs)
                   for _ in range(state.m_w)]
    chol_adams = [AdamState.zeros((state.num_features, state.num_features),
                                  learning_rate=config.lr_sigma, **adam_kwargs)
                  for _ in range(state.m_w)]

    current = elbo(state, net, x_vals, hyper, quad)
    report.elbo_trace.append(current)

    for sweep in range(config.max_iter):
        tick = time.perf_counter()
        state.rho_a, state.rho_b = update_rho(state, net, hyper)
        state.gamma_a, state.gamma_b = update_gamma(state, hyper)
        state.theta0, state.sigma0 = update_phi0(state, hyper)
        for k in range(state.m_w):
            theta_adams[k], chol_adams[k] = optimize_phi_component(
                k, state, x_vals, config, quad, theta_adams[k], chol_adams[k],
                report.warnings)
        state.nu, state.omega = update_sigma2(state, hyper)
        state.phi_z = update_z(state, net)
        state.phi_w = update_w(state, net, x_vals, quad)

        previous, current = current, elbo(state, net, x_vals, hyper, quad)
        report.elbo_trace.append(current)
        report.sweep_seconds.append(time.perf_counter() - tick)
        report.num_sweeps = sweep + 1
        if abs(current - previous) <= config.tol * max(abs(previous), 1e-12):
            report.converged = True
            break

    report.runtime_seconds = time.perf_counter() - start
    report.occupied_global, report.occupied_layer = _occupied_counts(state)
    return state, report
