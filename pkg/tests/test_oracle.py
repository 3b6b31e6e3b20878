"""The oracle module's own contracts: conditionals vs exhaustive enumeration,
Monte Carlo convergence, finite differences on known functions."""

import numpy as np
import pytest

from muxblock.model import Hyperparameters

from oracles import (brute_force_discrete_posterior, cond_gamma, cond_phi0,
                     cond_rho, cond_sigma2, cond_w, cond_z,
                     conditional_from_posterior, finite_diff,
                     mc_gauss_expectations, random_tiny_instance)


class TestConditionalsAgainstEnumeration:
    def test_single_group_certainty(self):
        rng = np.random.default_rng(0)
        inst = random_tiny_instance(rng, n=3, l=1, m_w=1, m_z=1, p=1)
        np.testing.assert_allclose(cond_z(inst, 0, 0), [1.0])
        np.testing.assert_allclose(cond_w(inst, 0), [1.0])

    def test_parity_with_brute_force(self):
        rng = np.random.default_rng(1)
        for trial in range(4):
            inst = random_tiny_instance(rng, n=3, l=1, m_w=2, m_z=2, p=2)
            pmf = brute_force_discrete_posterior(inst)
            assert sum(pmf.values()) == pytest.approx(1.0)
            for i in range(3):
                np.testing.assert_allclose(
                    cond_w(inst, i),
                    conditional_from_posterior(pmf, inst, "w", None, i),
                    atol=1e-10)
                np.testing.assert_allclose(
                    cond_z(inst, 0, i),
                    conditional_from_posterior(pmf, inst, "z", 0, i),
                    atol=1e-10)

    def test_log_joint_ratio_route(self):
        from muxblock.model import log_joint

        rng = np.random.default_rng(2)
        inst = random_tiny_instance(rng, n=4, l=2, m_w=2, m_z=3, p=2)
        i, ell = 2, 1
        logs = []
        for k in range(inst.m_z):
            z_mod = inst.z.copy()
            z_mod[ell, i] = k
            logs.append(log_joint(inst.params(z=z_mod), inst.net, inst.x,
                                  inst.hyper))
        weights = np.exp(np.array(logs) - max(logs))
        np.testing.assert_allclose(cond_z(inst, ell, i),
                                   weights / weights.sum(), atol=1e-10)


class TestCountConditionals:
    def test_gamma_zero_counts(self):
        rng = np.random.default_rng(3)
        inst = random_tiny_instance(rng, n=3, l=1, m_w=2, m_z=2, p=1,
                                    hyper=Hyperparameters(eta0=1.7))
        inst.w[:] = 0
        a, b = cond_gamma(inst, 1, 0)
        assert (a, b) == (1.0, 1.7)

    def test_gamma_all_one_cell(self):
        rng = np.random.default_rng(4)
        inst = random_tiny_instance(rng, n=3, l=2, m_w=2, m_z=2, p=1)
        inst.w[:] = 0
        inst.z[:] = 0
        a, b = cond_gamma(inst, 0, 0)
        assert (a, b) == (1.0 + 6, inst.hyper.eta0)

    def test_rho_empty_network(self):
        rng = np.random.default_rng(5)
        inst = random_tiny_instance(rng, n=3, l=1, m_w=2, m_z=2, p=1)
        inst.net.adjacency[:] = 0
        inst.z[:] = 0
        a, b = cond_rho(inst, 1, 1)
        assert (a, b) == (inst.hyper.alpha0, inst.hyper.beta0)

    def test_rho_complete_block(self):
        rng = np.random.default_rng(6)
        inst = random_tiny_instance(rng, n=3, l=1, m_w=1, m_z=1, p=1)
        inst.net.adjacency[:] = 1 - np.eye(3, dtype=np.int8)
        inst.z[:] = 0
        a, b = cond_rho(inst, 0, 0)
        assert (a, b) == (inst.hyper.alpha0 + 6, inst.hyper.beta0)

    def test_phi0_balanced(self):
        rng = np.random.default_rng(7)
        inst = random_tiny_instance(rng, n=3, l=1, m_w=2, m_z=2, p=2)
        inst.sigma2[0] = 1.0
        mean, scale = cond_phi0(inst, 0)
        np.testing.assert_allclose(mean, inst.phi[0] / 2)
        assert scale == pytest.approx(0.5)

    def test_phi0_tiny_variance_limit(self):
        rng = np.random.default_rng(8)
        inst = random_tiny_instance(rng, n=3, l=1, m_w=2, m_z=2, p=2)
        inst.sigma2[0] = 1e-12
        mean, scale = cond_phi0(inst, 0)
        np.testing.assert_allclose(mean, inst.phi[0], atol=1e-9)
        assert scale == pytest.approx(0.0, abs=1e-9)

    def test_sigma2_formula(self):
        rng = np.random.default_rng(9)
        inst = random_tiny_instance(rng, n=3, l=1, m_w=2, m_z=2, p=2)
        shape, scale = cond_sigma2(inst, 1)
        diff = inst.phi[1] - inst.phi0[1]
        assert shape == pytest.approx(inst.hyper.nu0 + 1.0)
        assert scale == pytest.approx(inst.hyper.omega0 + 0.5 * diff @ diff)


class TestMonteCarloOracle:
    def test_zero_variance_exact(self):
        mc = mc_gauss_expectations(np.array([1.0]), np.array([0.3]),
                                   np.array([[1e-12]]), 10_000, seed=0)
        from scipy.special import log_ndtr
        assert mc.expectations.e_log_phi == pytest.approx(log_ndtr(0.3),
                                                          abs=1e-9)

    def test_symmetric_pairing(self):
        mc = mc_gauss_expectations(np.array([1.0]), np.array([0.0]),
                                   np.array([[1.2]]), 400_000, seed=1)
        assert mc.expectations.e_log_phi == pytest.approx(
            mc.expectations.e_log_1m_phi,
            abs=4 * mc.standard_errors.e_log_phi + 1e-4)

    def test_root_n_convergence(self):
        # quadrupling the sample count halves the standard error within 30%
        args = (np.array([0.7, -0.3]), np.array([0.2, 0.5]),
                np.linalg.cholesky(np.array([[1.0, 0.2], [0.2, 0.7]])))
        small = mc_gauss_expectations(*args, 50_000, seed=2)
        large = mc_gauss_expectations(*args, 200_000, seed=3)
        ratio = large.standard_errors.e_d2 / small.standard_errors.e_d2
        assert 0.5 * 0.7 < ratio < 0.5 * 1.3


class TestFiniteDiff:
    def test_linear_exact(self):
        coef = np.array([2.0, -3.0, 0.5])
        grad = finite_diff(lambda v: float(coef @ v), np.array([1.0, 2.0, -1.0]))
        np.testing.assert_allclose(grad, coef, rtol=1e-8)

    def test_quadratic_second_order(self):
        point = np.array([1.5, -0.5])
        grad = finite_diff(lambda v: float(v @ v), point)
        np.testing.assert_allclose(grad, 2 * point, rtol=1e-8)
