#!/usr/bin/env python3
"""
Test script for convex body membership, validation and slice geometry
"""

import math
import sys

import numpy as np
import pytest

from convex_bodies import (Ball, HalfSpace, Polytope, SliceSpec, check_slice_domination, contains,
                           contains_closure, interior_point, sample_interior, scale, slice_width,
                           validate_conditions)
from dominating import solve
from errors import ConfigError, DimensionMismatch, EmptyPolytope, InvalidAxis
from gauss_linalg import build_gaussian

IDENTITY = build_gaussian(np.eye(2))
BALL = Ball(center=[2.0, 0.0], radius=1.0)


def test_open_membership():
    assert contains(BALL, [2.0, 0.0])
    assert not contains(BALL, [1.0, 0.0])
    assert contains(HalfSpace(normal=[1.0, 0.0], offset=1.0), [1.5, 7.0])


def test_closure_membership():
    assert contains_closure(BALL, [1.0, 0.0])
    assert contains_closure(BALL, [2.5, 0.0])
    assert not contains_closure(BALL, [0.5, 0.0])


def test_membership_is_vectorised():
    inside = contains(BALL, np.array([[2.0, 0.0], [0.0, 0.0], [2.0, 0.9]]))
    assert inside.tolist() == [True, False, True]
    with pytest.raises(DimensionMismatch):
        contains(BALL, [1.0, 2.0, 3.0])


def test_polytope_membership():
    corner = Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([0.0, 1.0], 1.0)))
    assert contains(corner, [2.0, 2.0])
    assert not contains(corner, [2.0, 1.0])
    assert contains_closure(corner, [1.0, 1.0])


def test_validate_conditions():
    assert validate_conditions(BALL, IDENTITY).passed
    touching = validate_conditions(Ball(center=[2.0, 0.0], radius=2.0), IDENTITY)
    assert not touching.passed
    assert touching.failures() == ["excludes_origin"]
    with pytest.raises(EmptyPolytope):
        validate_conditions(Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([-1.0, 0.0], 0.0))), IDENTITY)


def test_validate_polytope_min_norm():
    corner = Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([0.0, 1.0], 1.0)))
    report = validate_conditions(corner, IDENTITY)
    assert report.passed
    assert report.min_norm == pytest.approx(math.sqrt(2.0), abs=1e-8)


def test_scale():
    assert scale(BALL, 1.0).radius == BALL.radius
    scaled = scale(BALL, 3.0)
    assert np.allclose(scaled.center, [6.0, 0.0]) and scaled.radius == 3.0
    assert scale(HalfSpace([1.0, 0.0], 1.0), 2.0).offset == 2.0
    with pytest.raises(ConfigError):
        scale(BALL, 0.0)


def test_interior_point():
    corner = Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([0.0, 1.0], 1.0)))
    point, slack = interior_point(corner)
    assert slack == pytest.approx(1.0)
    assert contains(corner, point)


def test_slice_width_ball_chord():
    width = slice_width(BALL, [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], 0.5)
    assert width == pytest.approx(math.sqrt(2 * 0.5 - 0.25), abs=1e-9)
    closed = slice_width(BALL, [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], 0.5, method="closed_form")
    assert closed == pytest.approx(width, abs=1e-9)


def test_slice_width_rotated_ball_skewed_covariance():
    model = build_gaussian(np.array([[2.0, 0.4], [0.4, 1.0]]))
    ball = Ball(center=[2.0, 1.0], radius=0.7)
    dp = solve(model, ball)
    for s in (1e-3, 0.01, 0.1, 0.3, 1.0):
        bisection = slice_width(ball, dp.a0, dp.f_unit, dp.f_unit, s)
        closed = slice_width(ball, dp.a0, dp.f_unit, dp.f_unit, s, method="closed_form")
        assert bisection == pytest.approx(closed, abs=1e-8)
        assert closed == pytest.approx(math.sqrt(2 * 0.7 * s - s * s), abs=1e-6)


def test_slice_width_methods_agree_off_axis():
    rng = np.random.default_rng(31)
    model = build_gaussian(np.array([[2.0, 0.4], [0.4, 1.0]]))
    bodies = (Ball(center=[2.0, 1.0], radius=0.7),
              Polytope((HalfSpace([1.0, 0.2], 1.0), HalfSpace([0.3, 1.0], 1.0))))
    for body in bodies:
        dp = solve(model, body)
        for _ in range(20):
            x0 = dp.f_unit + 0.5 * rng.standard_normal(2)
            if x0 @ dp.f_unit <= 0.1:
                continue
            s = rng.uniform(0.01, 0.5)
            bisection = slice_width(body, dp.a0, dp.f_unit, x0, s)
            closed = slice_width(body, dp.a0, dp.f_unit, x0, s, method="closed_form")
            assert bisection == pytest.approx(closed, abs=1e-8)


def test_slice_width_tangency_limit():
    s = 1e-6
    width = slice_width(BALL, [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], s)
    assert width / math.sqrt(2 * s) == pytest.approx(1.0, rel=1e-5)


def test_slice_width_halfspace_unbounded():
    hs = HalfSpace([1.0, 0.0], 1.0)
    assert slice_width(hs, [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], 0.3) == math.inf


def test_slice_width_rejects_bad_axis():
    with pytest.raises(InvalidAxis):
        slice_width(BALL, [1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], 0.5)


def test_slice_domination_ball():
    dp = solve(IDENTITY, BALL)
    grid = [0.5 * 2.0 ** -k for k in range(8)]
    report = check_slice_domination(BALL, dp, SliceSpec("sqrt", 1.0, 0.5), grid)
    assert report.dominated
    assert all(row.margin >= 0 for row in report.rows)
    assert not check_slice_domination(BALL, dp, SliceSpec("sqrt", 2.0, 0.5), grid).dominated


def test_slice_domination_rotated_ball():
    angle = math.pi / 6
    ball = Ball(center=[2.0 * math.cos(angle), 2.0 * math.sin(angle)], radius=1.0)
    dp = solve(IDENTITY, ball)
    grid = [0.5 * 2.0 ** -k for k in range(8)]
    report = check_slice_domination(ball, dp, SliceSpec("sqrt", 1.0, 0.5), grid)
    assert report.dominated
    for row in report.rows:
        assert row.width == pytest.approx(math.sqrt(2 * row.s - row.s ** 2), abs=1e-8)


def test_slice_domination_halfspace():
    hs = HalfSpace([1.0, 0.0], 1.0)
    dp = solve(IDENTITY, hs)
    report = check_slice_domination(hs, dp, SliceSpec("sqrt_log", 5.0, 0.5), [0.1, 0.2, 0.5])
    assert report.dominated
    assert all(row.width == math.inf for row in report.rows)


def test_sample_interior_stays_inside():
    rng = np.random.default_rng(5)
    for body in (BALL, HalfSpace([1.0, 1.0], 1.0),
                 Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([0.0, 1.0], 1.0)))):
        points = sample_interior(body, rng, 500)
        assert points.shape == (500, 2)
        assert contains(body, points).all()


BODIES = (BALL, HalfSpace([1.0, 1.0], 1.0),
          Polytope((HalfSpace([1.0, 0.0], 1.0), HalfSpace([0.0, 1.0], 1.0), HalfSpace([1.0, -1.0], -2.0))))


@pytest.mark.parametrize("body", BODIES)
def test_convex_combinations_stay_inside(body):
    rng = np.random.default_rng(41)
    first = sample_interior(body, rng, 10 ** 4)
    second = sample_interior(body, rng, 10 ** 4)
    weights = rng.random((10 ** 4, 1))
    assert contains(body, weights * first + (1.0 - weights) * second).all()


@pytest.mark.parametrize("body", BODIES)
def test_open_membership_implies_closure(body):
    points = 3.0 * np.random.default_rng(43).standard_normal((5000, 2))
    inside = contains(body, points)
    assert contains_closure(body, points)[inside].all()


@pytest.mark.parametrize("body", BODIES)
@pytest.mark.parametrize("t", [0.25, 1.0, 3.5])
def test_membership_under_dilation(body, t):
    points = 3.0 * np.random.default_rng(47).standard_normal((5000, 2))
    dilated = scale(body, t)
    assert (contains(dilated, t * points) == contains(body, points)).all()
    assert (contains_closure(dilated, t * points) == contains_closure(body, points)).all()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
