#!/usr/bin/env python3
"""
Test script for the exact representation identity and its local term
"""

import math
import sys

import numpy as np
import pytest
from scipy.stats import norm

from convex_bodies import Ball, HalfSpace, Polytope
from dominating import solve
from errors import CovarianceMismatch, NotEnumerable, TooLarge
from gauss_linalg import build_gaussian
from representation import (brute_force_probability, jn_estimate, local_term_exact, repr_exact,
                            theorem1_prefactor)
from tilting import (DiscreteBase, GaussianBase, GrowthSchedule, RademacherProduct, gaussian_partner,
                     make_tilt, scaled_log_mgf)

COIN = RademacherProduct([1.0])
HALF_LINE = HalfSpace([1.0], 0.5)
QUADRANT = Polytope((HalfSpace([1.0, 0.0], 0.3), HalfSpace([0.0, 1.0], 0.3)))


def dominating_for(base, body):
    return solve(gaussian_partner(base), body)


def test_brute_force_values():
    assert brute_force_probability(COIN, 4, 3.0, HALF_LINE) == pytest.approx(5.0 / 16.0, abs=1e-15)
    assert brute_force_probability(COIN, 1, 1.0, HALF_LINE) == pytest.approx(0.5, abs=1e-15)
    assert brute_force_probability(COIN, 4, 1.0, HalfSpace([1.0], 10.0)) == 0.0


def test_brute_force_cap():
    with pytest.raises(TooLarge):
        brute_force_probability(RademacherProduct([1.0, 1.0]), 12, 2.0, QUADRANT)
    with pytest.raises(NotEnumerable):
        brute_force_probability(GaussianBase(build_gaussian(np.eye(1))), 2, 1.0, HALF_LINE)


def test_coin_fixture_decomposition():
    dp = dominating_for(COIN, HALF_LINE)
    assert dp.a0[0] == pytest.approx(0.5)
    assert dp.v[0] == pytest.approx(0.5)
    assert dp.lambda_star == pytest.approx(0.125)
    decomposition = repr_exact(COIN, 4, 3.0, HALF_LINE, dp)
    assert decomposition.mode == "exact_enumeration"
    assert decomposition.probability == pytest.approx(0.3125, abs=1e-15)
    assert decomposition.formula == pytest.approx(0.3125, rel=1e-12)


@pytest.mark.parametrize("n", [2, 4, 6, 8])
@pytest.mark.parametrize("b_n", [1.0, 3.0, 7.0])
def test_identity_on_the_line(n, b_n):
    dp = dominating_for(COIN, HALF_LINE)
    decomposition = repr_exact(COIN, n, b_n, HALF_LINE, dp)
    assert decomposition.gap <= 1e-12 * decomposition.probability


@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_identity_on_a_quadrant(n):
    base = RademacherProduct([1.0, 1.0])
    dp = dominating_for(base, QUADRANT)
    decomposition = repr_exact(base, n, 2.0, QUADRANT, dp)
    assert decomposition.probability > 0
    assert decomposition.gap <= 1e-12 * decomposition.probability


def test_identity_for_skewed_discrete_law():
    base = DiscreteBase([[1.0], [-0.5]], [1.0 / 3.0, 2.0 / 3.0])
    body = HalfSpace([1.0], 0.3)
    decomposition = repr_exact(base, 6, 2.0, body, dominating_for(base, body))
    assert decomposition.gap <= 1e-12 * decomposition.probability


def test_single_step_identity():
    decomposition = repr_exact(COIN, 1, 1.0, HALF_LINE, dominating_for(COIN, HALF_LINE))
    assert decomposition.probability == pytest.approx(0.5)
    assert decomposition.gap <= 1e-12


def test_covariance_mismatch():
    dp = dominating_for(COIN, HALF_LINE)
    with pytest.raises(CovarianceMismatch):
        repr_exact(RademacherProduct([2.0]), 4, 3.0, HALF_LINE, dp)


def test_gaussian_halfspace_quadrature():
    model = build_gaussian(np.eye(2))
    body = HalfSpace([1.0, 0.0], 1.0)
    base = GaussianBase(model)
    decomposition = repr_exact(base, 16, 6.0, body, solve(model, body))
    assert decomposition.mode == "quadrature"
    assert decomposition.probability == pytest.approx(norm.sf(1.5), rel=1e-14)
    assert decomposition.formula == pytest.approx(decomposition.probability, rel=1e-10)
    assert decomposition.local_term == pytest.approx(math.exp(1.5 ** 2 / 2) * norm.sf(1.5), rel=1e-10)


def test_gaussian_ball_is_not_enumerable():
    model = build_gaussian(np.eye(2))
    body = Ball([2.0, 0.0], 1.0)
    with pytest.raises(NotEnumerable):
        repr_exact(GaussianBase(model), 4, 2.0, body, solve(model, body))


def test_jn_estimate_matches_exact_local_term():
    base = RademacherProduct([1.0, 1.0])
    dp = dominating_for(base, QUADRANT)
    exact = local_term_exact(base, 6, 2.0, QUADRANT, dp)
    sampler = make_tilt(base, dp, 6, 2.0)
    estimate = jn_estimate(sampler, dp, 6, 2.0, QUADRANT, 200_000, seed=31)
    assert abs(estimate.p_hat - exact) <= 4 * estimate.std_err


def test_jn_estimate_whole_space_lognormal():
    model = build_gaussian(np.eye(2))
    dp = solve(model, HalfSpace([1.0, 0.0], 1.0))
    everything = HalfSpace([1.0, 0.0], -1e6)
    sampler = make_tilt(GaussianBase(model), dp, 10, 3.0)
    estimate = jn_estimate(sampler, dp, 10, 3.0, everything, 200_000, seed=5)
    expected = math.exp(dp.sigma_g2 * 9.0 / 20.0)
    assert abs(estimate.p_hat - expected) <= 4 * estimate.std_err


def test_jn_estimate_disjoint_body_is_zero():
    dp = dominating_for(COIN, HALF_LINE)
    sampler = make_tilt(COIN, dp, 4, 1.0)
    estimate = jn_estimate(sampler, dp, 4, 1.0, HalfSpace([1.0], 10.0), 5000, seed=1)
    assert estimate.p_hat == 0.0 and estimate.std_err == 0.0


def test_jn_estimate_is_thread_invariant():
    base = RademacherProduct([1.0, 1.0])
    dp = dominating_for(base, QUADRANT)
    sampler = make_tilt(base, dp, 6, 2.0)
    single = jn_estimate(sampler, dp, 6, 2.0, QUADRANT, 50_000, seed=8, threads=1, block_size=1000)
    pooled = jn_estimate(sampler, dp, 6, 2.0, QUADRANT, 50_000, seed=8, threads=4, block_size=1000)
    assert single.p_hat == pooled.p_hat
    assert single.std_err == pooled.std_err


def test_theorem1_prefactor():
    dp = solve(build_gaussian(np.eye(2)), HalfSpace([1.0, 0.0], 1.0))
    b_n = GrowthSchedule(1.0, 0.6).b(10 ** 4)
    assert theorem1_prefactor(dp, 10 ** 4, b_n) == pytest.approx(math.exp(-0.5 * 10 ** 0.8), rel=1e-12)
    assert theorem1_prefactor(dp, 10 ** 4, b_n) == pytest.approx(0.042647, abs=1e-6)
    assert theorem1_prefactor(dp, 10 ** 4, 0.0) == 1.0


def test_prefactor_correction_decay():
    base = DiscreteBase([[1.0], [-0.5]], [1.0 / 3.0, 2.0 / 3.0])
    schedule = GrowthSchedule(1.0, 0.6)
    ns = np.array([10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6])
    corrections = []
    for n in ns:
        scale = schedule.b(n) ** 2 / n
        corrections.append(abs(scale * (0.25 - scaled_log_mgf(base, [1.0], n, schedule))))
    fitted = np.polyfit(np.log(ns), np.log(corrections), 1)[0]
    assert fitted == pytest.approx(3 * 0.6 - 2, abs=0.05)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
