#!/usr/bin/env python3
"""
Test script for the Gaussian limit formulas and their Monte Carlo checks
"""

import math
import sys
from dataclasses import replace

import numpy as np
import pytest

from asymptotics import (cameron_martin_check, finite_rho_ball_integral, g2_eigenvalues,
                         gaussian_set_probability, quadrature_integral, spectral_sweep, theorem1_upper,
                         theorem5_value, weighted_chisq_laplace)
from convex_bodies import Ball, HalfSpace
from dominating import solve
from errors import ConfigError, ScheduleError
from gauss_linalg import build_gaussian, build_spectral
from tilting import GrowthSchedule

IDENTITY = build_gaussian(np.eye(2))
BALL = Ball([2.0, 0.0], 1.0)


def schedule():
    return GrowthSchedule(c=1.0, alpha=0.6)


def test_laplace_product_values():
    assert weighted_chisq_laplace([1.0], 1.0) == pytest.approx(2 ** -0.5, rel=1e-12)
    assert weighted_chisq_laplace([], 3.0) == 1.0
    assert weighted_chisq_laplace([1.0, 1.0], 2.0) == pytest.approx(2.0 / 3.0, rel=1e-12)
    assert weighted_chisq_laplace([0.0, 0.0], 1.0) == 1.0
    with pytest.raises(ConfigError):
        weighted_chisq_laplace([-1.0], 1.0)


@pytest.mark.parametrize("eigs", [[1.0], [1.0, 1.0], list(np.arange(2, 21, dtype=float) ** -2)])
@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_quadrature_matches_laplace_product(eigs, c):
    closed = weighted_chisq_laplace(eigs, c)
    estimate = quadrature_integral(eigs, c, 200_000, seed=21)
    assert abs(estimate.p_hat - closed) <= 4 * estimate.std_err + 1e-3 * closed


def test_quadrature_limits_and_guards():
    assert quadrature_integral([1.0], 1e12, 1000, seed=1).p_hat == pytest.approx(1.0, abs=1e-10)
    assert quadrature_integral([], 1.0, 1000, seed=1).p_hat == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ConfigError):
        quadrature_integral([1.0], 1.0, 1000, quad_nodes=8, seed=1)


def test_g2_eigenvalues_deflate_the_normal_direction():
    dp = solve(IDENTITY, BALL)
    assert np.allclose(g2_eigenvalues(dp), [1.0])
    model = build_gaussian(np.array([[2.0, 0.4], [0.4, 1.0]]))
    dp = solve(model, Ball([1.0, 3.0], 1.0))
    eigs = g2_eigenvalues(dp)
    assert eigs.shape == (1,) and eigs[0] > 0


def test_theorem5_fixture():
    result = theorem5_value(IDENTITY, BALL, 10 ** 4, schedule())
    assert result.b_geom == pytest.approx(1.0)
    assert result.integral == pytest.approx(2 ** -0.5, rel=1e-12)
    assert result.scale == pytest.approx(10 ** 0.8)
    expected = (2 * math.pi * 10 ** 0.8) ** -0.5 * math.exp(-0.5 * 10 ** 0.8) * 2 ** -0.5
    assert result.value == pytest.approx(expected, rel=1e-10)
    assert result.value == pytest.approx(0.004790, abs=2e-6)


def test_theorem1_upper_fixture():
    dp = solve(IDENTITY, BALL)
    upper = theorem1_upper(dp, 10 ** 4, schedule())
    assert upper == pytest.approx(0.006774, abs=2e-6)
    ratio = theorem5_value(IDENTITY, BALL, 10 ** 4, schedule()).value / upper
    assert ratio == pytest.approx(2 ** -0.5, rel=1e-10)


def test_theorem1_upper_scales_with_sigma():
    dp = solve(IDENTITY, BALL)
    doubled = replace(dp, sigma_g2=2.0 * dp.sigma_g2)
    ratio = theorem1_upper(dp, 10 ** 4, schedule()) / theorem1_upper(doubled, 10 ** 4, schedule())
    assert ratio == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_theorem5_never_exceeds_upper_bound():
    rng = np.random.default_rng(77)
    for _ in range(50):
        a = rng.standard_normal((2, 2))
        model = build_gaussian(a @ a.T + 0.3 * np.eye(2))
        center = rng.standard_normal(2) * 3.0
        ball = Ball(center, 0.8 * np.linalg.norm(center) * rng.random() + 0.05)
        if not np.linalg.norm(center) > ball.radius:
            continue
        result = theorem5_value(model, ball, 5000, schedule())
        assert 0 < result.integral <= 1.0
        assert result.value <= theorem1_upper(result.dp, 5000, schedule()) * (1 + 1e-12)


def test_theorem5_needs_theorem_mode():
    with pytest.raises(ScheduleError):
        theorem5_value(IDENTITY, BALL, 100, GrowthSchedule(1.0, 0.8, theorem_mode=False))


def test_theorem5_spectral_covariance():
    spectral = build_spectral(2.0, 20)
    result = theorem5_value(spectral, BALL, 10 ** 4, schedule())
    tail = np.arange(2, 21, dtype=float) ** -2
    assert np.allclose(result.g2_eigs, tail, atol=1e-12)
    assert result.integral == pytest.approx(np.prod((1 + tail) ** -0.5), rel=1e-10)
    assert result.nominal_tail == pytest.approx(spectral.nominal_tail)
    closed = weighted_chisq_laplace(result.g2_eigs, result.b_geom)
    assert quadrature_integral(result.g2_eigs, result.b_geom, 100_000, seed=3).p_hat == pytest.approx(
        closed, abs=0.01)


def test_spectral_sweep_stabilises():
    rows = spectral_sweep(2.0, [5, 10, 20, 40], 10 ** 4, schedule())
    integrals = [row.integral for row in rows]
    assert all(later < earlier for earlier, later in zip(integrals, integrals[1:]))
    assert abs(integrals[-1] - integrals[-2]) < abs(integrals[1] - integrals[0])
    assert all(later.nominal_tail < earlier.nominal_tail for earlier, later in zip(rows, rows[1:]))


def test_gaussian_halfspace_probability():
    result = gaussian_set_probability(IDENTITY, HalfSpace([1.0, 0.0], 1.0), 2.0)
    assert result.p_hat == pytest.approx(0.0227501, abs=1e-7)
    assert result.std_err == 0.0
    assert gaussian_set_probability(IDENTITY, BALL, 0.0).p_hat == 0.0


def test_gaussian_ball_naive_and_tilted_agree():
    naive = gaussian_set_probability(IDENTITY, BALL, 1.0, 200_000, seed=12)
    tilted = gaussian_set_probability(IDENTITY, BALL, 1.0, 200_000, seed=13, tilted=True)
    assert abs(naive.p_hat - tilted.p_hat) <= 4 * math.hypot(naive.std_err, tilted.std_err)
    assert tilted.ess <= tilted.samples


def test_cameron_martin_identity():
    check = cameron_martin_check(IDENTITY, BALL, 2.0, 400_000, seed=2)
    assert check.lhs.p_hat > 0
    assert check.z_score <= 4.0


def test_finite_rho_integral_reproduces_probability():
    result = finite_rho_ball_integral(IDENTITY, BALL, 2.0, 100_000, seed=6)
    naive = gaussian_set_probability(IDENTITY, BALL, 2.0, 400_000, seed=7)
    bound = 4 * math.hypot(naive.std_err, math.exp(-2.0) * result.integral.std_err) + 0.02 * naive.p_hat
    assert abs(result.probability - naive.p_hat) <= bound


def test_finite_rho_integral_approaches_laplace_product():
    result = finite_rho_ball_integral(IDENTITY, BALL, 30.0, 100_000, seed=9)
    assert result.limit == pytest.approx(2 ** -0.5, rel=1e-12)
    assert result.normalised == pytest.approx(result.limit, rel=0.02)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
