"""Stepsize rules, tuning helpers, and iteration-count formulas."""

from __future__ import annotations

import math

import numpy as np
import pytest

from threepoint.directions import DirectionDistribution, constants
from threepoint.schedules import (
    Constant,
    Decreasing,
    FixedHorizon,
    ISConstant,
    ISDecreasing,
    ISSolutionDependent,
    ISSolutionFree,
    SolutionDependent,
    SolutionFree,
    StepContext,
    is_min_ratio,
    is_sum_weighted_L,
    optimal_gamma0,
    quadratic_level_radius,
    required_iterations,
    solution_free_t_max,
    solution_free_t_max_is,
    stepsize,
)


def _ctx(k=0, f_z=1.0, probe=None, index=None, direction=None):
    return StepContext(k, f_z, probe, index, direction)


class TestRules:
    def test_constant(self):
        assert stepsize(Constant(1.005), _ctx()) == 1.005

    def test_fixed_horizon(self):
        assert stepsize(FixedHorizon(1.0, 100), _ctx()) == 0.1

    def test_decreasing(self):
        rule = Decreasing(alpha=2.0, theta=2.0)
        assert stepsize(rule, _ctx(k=0)) == 1.0
        assert stepsize(rule, _ctx(k=1)) == 0.5
        gammas = [stepsize(rule, _ctx(k=k)) for k in range(50)]
        assert all(a > b for a, b in zip(gammas, gammas[1:]))
        assert max(gammas) == 2.0 / rule.theta

    def test_solution_dependent(self):
        rule = SolutionDependent(mu=2.0, L=4.0, mu_d=0.5, f_star=1.0, beta=0.5)
        # (1-0.5) * 1 * 0.5 * sqrt(2 * 2 * 2) / 4 = sqrt(2)/8
        assert stepsize(rule, _ctx(f_z=3.0)) == pytest.approx(math.sqrt(2.0) / 8.0, rel=1e-15)
        assert stepsize(rule, _ctx(f_z=1.0)) == 0.0

    def test_solution_dependent_theta_schedule(self):
        rule = SolutionDependent(mu=1.0, L=1.0, mu_d=1.0, f_star=0.0, beta=0.0,
                                 theta_k=lambda k: 1.0 if k == 0 else 0.5)
        g0 = stepsize(rule, _ctx(k=0, f_z=0.5))
        g1 = stepsize(rule, _ctx(k=1, f_z=0.5))
        assert g1 == pytest.approx(0.5 * g0, rel=1e-15)

    def test_solution_free(self):
        rule = SolutionFree(L=2.0, t=0.5, beta=0.5)
        s = np.array([1.0, 0.0])
        assert stepsize(rule, _ctx(f_z=1.0, probe=2.0, direction=s)) == 0.5
        assert rule.needs_probe

    def test_is_constant(self):
        rule = ISConstant(0.05, np.array([1.0, 10.0]))
        assert stepsize(rule, _ctx(index=1)) == 0.005
        assert stepsize(rule, _ctx(index=0)) == 0.05

    def test_is_decreasing(self):
        rule = ISDecreasing(alpha=1.0, theta=2.0, w=np.array([1.0, 4.0]))
        assert stepsize(rule, _ctx(k=0, index=1)) == 0.25
        assert stepsize(rule, _ctx(k=2, index=0)) == 0.5

    def test_is_solution_dependent(self):
        p = np.array([0.5, 0.5])
        w = np.array([1.0, 2.0])
        coord_L = np.array([1.0, 2.0])
        rule = ISSolutionDependent(mu=1.0, p=p, w=w, coord_L=coord_L, f_star=0.0, beta=0.0)
        m = 0.25
        s_w = 0.5 * 1.0 / 1.0 + 0.5 * 2.0 / 4.0  # = 0.75
        expected = m / (w[1] * s_w) * math.sqrt(2.0 * 2.0)
        assert stepsize(rule, _ctx(f_z=2.0, index=1)) == pytest.approx(expected, rel=1e-14)

    def test_is_solution_free(self):
        rule = ISSolutionFree(coord_L=np.array([1.0, 4.0]), t=0.25, beta=0.0)
        assert stepsize(rule, _ctx(f_z=1.0, probe=2.0, index=1)) == 1.0


class TestRuleValidation:
    def test_beta_message(self):
        with pytest.raises(ValueError, match=r"beta must lie in \[0,1\)"):
            SolutionDependent(mu=1.0, L=1.0, mu_d=1.0, f_star=0.0, beta=1.0)

    def test_positive_parameters(self):
        with pytest.raises(ValueError):
            Constant(0.0)
        with pytest.raises(ValueError):
            FixedHorizon(1.0, 0)
        with pytest.raises(ValueError):
            SolutionFree(L=0.0, t=0.1, beta=0.0)
        with pytest.raises(ValueError):
            SolutionFree(L=1.0, t=0.0, beta=0.0)

    def test_decreasing_theta_floor(self):
        with pytest.raises(ValueError, match="2/alpha"):
            Decreasing(alpha=1.0, theta=1.0)

    def test_theta_k_range(self):
        with pytest.raises(ValueError, match="theta_k"):
            SolutionDependent(mu=1.0, L=1.0, mu_d=1.0, f_star=0.0, beta=0.0, theta_k=2.0)

    def test_below_fstar_rejected(self):
        rule = SolutionDependent(mu=1.0, L=1.0, mu_d=1.0, f_star=1.0, beta=0.0)
        with pytest.raises(ValueError, match="f_star"):
            stepsize(rule, _ctx(f_z=0.5))

    def test_probe_and_unit_requirements(self):
        rule = SolutionFree(L=1.0, t=0.1, beta=0.0)
        with pytest.raises(ValueError, match="probe"):
            stepsize(rule, _ctx(direction=np.array([1.0])))
        with pytest.raises(ValueError, match="1"):
            stepsize(rule, _ctx(probe=2.0, direction=np.array([2.0, 0.0])))

    def test_is_rules_need_index(self):
        with pytest.raises(ValueError, match="direction_index"):
            stepsize(ISConstant(0.1, np.array([1.0])), _ctx())

    def test_p_w_validation(self):
        with pytest.raises(ValueError, match="sum to 1"):
            is_min_ratio(np.array([0.5, 0.6]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError, match="positive"):
            is_sum_weighted_L(np.array([1.0, 0.0]), np.array([1.0, 1.0]),
                              np.array([1.0, 1.0]))

    def test_wrapper_rejects_bad_output(self):
        class Broken:
            needs_probe = False

            def stepsize(self, ctx):
                return float("nan")

        with pytest.raises(ValueError, match="invalid stepsize"):
            stepsize(Broken(), _ctx())


class TestTuningHelpers:
    def test_optimal_gamma0(self):
        # sqrt(2 * 1 * 0.5 / 1) = 1 and sqrt(2 * 0.25 * 2 / 1) = 1
        assert optimal_gamma0(0.0, 0.5, 1.0, 1.0) == 1.0
        assert optimal_gamma0(0.5, 2.0, 1.0, 1.0) == 1.0

    def test_solution_free_t_max(self):
        # sqrt(4 * 1e-4 * 1 * 1) / 1 = 0.02
        assert solution_free_t_max(1e-4, 1.0, 1.0, 1.0) == pytest.approx(0.02, rel=1e-15)

    def test_t_max_warns_outside_guarantee(self):
        with pytest.warns(UserWarning, match="does not apply"):
            solution_free_t_max(1e-4, 2.0, 1.0, 1.0)

    def test_solution_free_t_max_is(self):
        p = np.array([0.5, 0.5])
        coord_L = np.array([1.0, 1.0])
        # ratio = 0.5, sum p L = 1 -> sqrt(4 eps mu 0.5)
        got = solution_free_t_max_is(1e-4, 1.0, p, coord_L)
        assert got == pytest.approx(math.sqrt(2e-4), rel=1e-15)

    def test_level_radius_l2(self):
        c = constants(DirectionDistribution("sphere", 2))
        assert quadratic_level_radius(np.array([1.0, 4.0]), 2.0, c) == 2.0

    def test_level_radius_weighted(self):
        c = constants(DirectionDistribution(
            "coord_weighted", 2, weights=np.array([0.5, 0.5])))
        # max(sqrt(4/1)/0.5, sqrt(4/4)/0.5) = 4
        assert quadratic_level_radius(np.array([1.0, 4.0]), 2.0, c) == 4.0

    def test_level_radius_rejects_rotation(self):
        gen = np.random.default_rng(0)
        q, _ = np.linalg.qr(gen.standard_normal((2, 2)))
        c = constants(DirectionDistribution(
            "orthonormal_weighted", 2, weights=np.array([0.5, 0.5]), basis=q))
        with pytest.raises(ValueError, match="rotated"):
            quadratic_level_radius(np.array([1.0, 4.0]), 2.0, c)


class TestRequiredIterations:
    def test_nc_exact(self):
        # 2 * 1 * 1 * 1 / (0.25 * 0.0625) = 128, all powers of two
        params = dict(gap=1.0, L=1.0, gamma_d=1.0, mu_d=0.5, epsilon=0.25)
        assert required_iterations("NC", params) == 128

    def test_sc_dep(self):
        params = dict(gap=1.0, kappa=8.0, theta=1.0, mu_d=0.5, epsilon=0.25)
        # 32 * ln(4) = 44.36 -> 45
        assert required_iterations("SC-DEP", params) == 45

    def test_sc_free_accepts_L_mu(self):
        params = dict(gap=1.0, L=8.0, mu=1.0, mu_d=0.5, epsilon=0.25)
        # 32 * ln(8) = 66.5 -> 67
        assert required_iterations("SC-FREE", params) == 67

    def test_cvx_const(self):
        params = dict(gap=1.0, L=1.0, gamma_d=1.0, mu_d=1.0, r0=1.0, epsilon=0.5)
        # (1/0.5) * ln(4) = 2.77 -> 3
        assert required_iterations("CVX-CONST", params) == 3

    def test_cvx_const_epsilon_cap(self):
        params = dict(gap=1.0, L=1.0, gamma_d=1.0, mu_d=1.0, r0=1.0, epsilon=2.0)
        with pytest.raises(ValueError, match="admissible"):
            required_iterations("CVX-CONST", params)

    def test_cvx_dec_exact(self):
        params = dict(gap=1.0, L=1.0, gamma_d=1.0, mu_d=1.0, r0=1.0,
                      beta=0.0, epsilon=0.125)
        # 2/0.125 * max(1, 1) - 2 = 14, dyadic-exact
        assert required_iterations("CVX-DEC", params) == 14

    def test_target_already_met(self):
        params = dict(gap=1.0, kappa=8.0, theta=1.0, mu_d=0.5, epsilon=2.0)
        assert required_iterations("SC-DEP", params) == 0

    def test_is_sc_free(self):
        params = dict(gap=1.0, mu=1.0, p=np.array([0.5, 0.5]),
                      coord_L=np.array([1.0, 1.0]), epsilon=0.25)
        # (1/0.5) * ln(8) = 4.16 -> 5
        assert required_iterations("IS-SC-FREE", params) == 5

    def test_is_importance_count_identity(self):
        # p proportional to L makes min p_i/L_i = 1/sum(L), so the count is
        # (sum L / mu) ln(2 gap / eps)
        coord_L = np.array([1.0, 3.0, 6.0])
        p = coord_L / coord_L.sum()
        assert float(np.min(p / coord_L)) == pytest.approx(1.0 / 10.0, rel=1e-15)
        params = dict(gap=1.0, mu=1.0, p=p, coord_L=coord_L, epsilon=0.25)
        expected = math.ceil(10.0 * math.log(8.0))
        assert required_iterations("IS-SC-FREE", params) == expected

    def test_monotone_in_epsilon_and_kappa(self):
        base = dict(gap=1.0, kappa=10.0, mu_d=0.5)
        counts = [required_iterations("SC-FREE", dict(base, epsilon=e))
                  for e in (0.5, 0.1, 0.01, 0.001)]
        assert counts == sorted(counts)
        kappas = [required_iterations("SC-FREE", dict(gap=1.0, kappa=k, mu_d=0.5,
                                                      epsilon=0.01))
                  for k in (2.0, 10.0, 50.0)]
        assert kappas == sorted(kappas)

    def test_missing_parameter_message(self):
        with pytest.raises(ValueError, match="missing parameter 'mu_d'"):
            required_iterations("NC", dict(gap=1.0, L=1.0, gamma_d=1.0, epsilon=0.1))

    def test_unknown_theorem(self):
        with pytest.raises(ValueError, match="unknown theorem"):
            required_iterations("NC-2", dict(gap=1.0, epsilon=0.1))

    def test_epsilon_positive(self):
        with pytest.raises(ValueError, match="epsilon"):
            required_iterations("NC", dict(gap=1.0, L=1.0, gamma_d=1.0, mu_d=1.0,
                                           epsilon=0.0))
