#!/usr/bin/env python3
"""
Open convex bodies: half-spaces, balls and polytopes.

Membership comes in two flavours. `contains` is the open set used by every
event {S_n / b_n in D}; `contains_closure` is the closed set the rate
function is minimised over. Both accept a single point or an (m, d) array.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from errors import ConfigError, DimensionMismatch, EmptyPolytope, InvalidAxis

logger = logging.getLogger(__name__)

GEOMETRY_TOL = 1e-9
SLICE_CAP = 1e12


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """Open half-space {x : <normal, x> > offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = np.atleast_1d(np.asarray(self.normal, dtype=float))
        if not np.linalg.norm(normal) > 0:
            raise ConfigError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return self.normal.shape[0]


@dataclass(frozen=True, eq=False)
class Ball:
    """Open Euclidean ball {x : |x - center| < radius}."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ConfigError("ball radius must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.shape[0]


@dataclass(frozen=True, eq=False)
class Polytope:
    """Open intersection of half-spaces."""

    constraints: Tuple[HalfSpace, ...]

    def __post_init__(self):
        constraints = tuple(self.constraints)
        if not constraints:
            raise ConfigError("polytope needs at least one constraint")
        if len({c.dim for c in constraints}) != 1:
            raise DimensionMismatch("polytope constraints have different dimensions")
        object.__setattr__(self, "constraints", constraints)

    @property
    def dim(self):
        return self.constraints[0].dim

    @property
    def normals(self):
        return np.array([c.normal for c in self.constraints])

    @property
    def offsets(self):
        return np.array([c.offset for c in self.constraints])


ConvexBody = Union[HalfSpace, Ball, Polytope]


@dataclass(frozen=True)
class SliceSpec:
    """Slice profile tau(s) = beta s^(1/2) (sqrt) or beta (s |log s|)^(1/2) (sqrt_log)."""

    kind: str
    beta: float
    delta: float

    def __post_init__(self):
        if self.kind not in ("sqrt", "sqrt_log"):
            raise ConfigError(f"unknown slice kind {self.kind!r}")
        if not (self.beta > 0 and self.delta > 0):
            raise ConfigError("slice beta and delta must be positive")

    def tau(self, s):
        if self.kind == "sqrt":
            return self.beta * math.sqrt(s)
        return self.beta * math.sqrt(s * abs(math.log(s)))


@dataclass(frozen=True)
class ValidationReport:
    open_convex: bool
    nonempty: bool
    excludes_origin: bool
    min_norm: Optional[float] = None

    @property
    def passed(self):
        return self.open_convex and self.nonempty and self.excludes_origin

    def failures(self):
        names = ("open_convex", "nonempty", "excludes_origin")
        return [name for name in names if not getattr(self, name)]


@dataclass(frozen=True)
class SliceMargin:
    s: float
    width: float
    tau: float

    @property
    def margin(self):
        return self.width - self.tau


@dataclass(frozen=True)
class SliceReport:
    dominated: bool
    rows: List[SliceMargin]


def _points(body, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != body.dim:
        raise DimensionMismatch(f"point has dimension {x.shape[-1]}, body has {body.dim}")
    return x


def _signed_slack(body, x):
    """Positive inside the open body, zero on the boundary, negative outside."""
    if isinstance(body, HalfSpace):
        return x @ body.normal - body.offset
    if isinstance(body, Ball):
        return body.radius - np.linalg.norm(x - body.center, axis=-1)
    if isinstance(body, Polytope):
        return np.min(x @ body.normals.T - body.offsets, axis=-1)
    raise ConfigError(f"unsupported body type {type(body).__name__}")


def contains(body, x):
    """Open membership (strict inequalities)."""
    return _signed_slack(body, _points(body, x)) > 0


def contains_closure(body, x):
    """Closed membership (non-strict inequalities)."""
    return _signed_slack(body, _points(body, x)) >= 0


def scale(body, t):
    """The dilated body tD for t > 0."""
    if not t > 0:
        raise ConfigError("scale factor must be positive")
    if isinstance(body, HalfSpace):
        return HalfSpace(body.normal, t * body.offset)
    if isinstance(body, Ball):
        return Ball(t * body.center, t * body.radius)
    return Polytope(tuple(scale(c, t) for c in body.constraints))


def interior_point(poly):
    """
    Chebyshev-style centre of a polytope by linear programming.

    Returns (x, t): the point and the largest normalised slack
    min_i (<v_i, x> - c_i) / |v_i|, capped at 1. t < 0 means the closure is empty.
    """
    normals, offsets = poly.normals, poly.offsets
    norms = np.linalg.norm(normals, axis=1)
    d = poly.dim
    # variables (x, t); maximise t subject to <v_i, x> - |v_i| t >= c_i
    objective = np.zeros(d + 1)
    objective[-1] = -1.0
    a_ub = np.hstack([-normals, norms[:, None]])
    bounds = [(None, None)] * d + [(None, 1.0)]
    result = linprog(objective, A_ub=a_ub, b_ub=-offsets, bounds=bounds, method="highs")
    if result.status != 0:
        raise EmptyPolytope(f"interior LP failed: {result.message}")
    return result.x[:d], float(result.x[-1])


def validate_conditions(body, model):
    """
    Check the standing assumptions on a body: open and convex, nonempty,
    and the origin outside its closure.

    Raises:
        EmptyPolytope when a polytope's closure is infeasible
    """
    if body.dim != model.dim:
        raise DimensionMismatch(f"body dimension {body.dim} != model dimension {model.dim}")

    if isinstance(body, HalfSpace):
        norm = float(np.linalg.norm(body.normal))
        return ValidationReport(True, True, body.offset > 0, min_norm=max(body.offset, 0.0) / norm)

    if isinstance(body, Ball):
        distance = float(np.linalg.norm(body.center)) - body.radius
        return ValidationReport(True, True, distance > 0, min_norm=max(distance, 0.0))

    _, slack = interior_point(body)
    if slack < -GEOMETRY_TOL:
        raise EmptyPolytope("polytope closure is empty", slack=slack)
    nonempty = slack > GEOMETRY_TOL

    # Circular at module level: dominating builds on this module.
    from dominating import min_rate_point
    from gauss_linalg import build_gaussian

    nearest, _ = min_rate_point(build_gaussian(np.eye(body.dim)), body)
    min_norm = float(np.linalg.norm(nearest))
    return ValidationReport(True, nonempty, min_norm > GEOMETRY_TOL, min_norm=min_norm)


def _unit(x):
    return x / np.linalg.norm(x)


def _orthogonal_direction(v_hat):
    """A unit vector orthogonal to v_hat (d >= 2)."""
    basis = np.zeros_like(v_hat)
    basis[np.argmin(np.abs(v_hat))] = 1.0
    direction = basis - (basis @ v_hat) * v_hat
    return _unit(direction)


def _worst_offsets(body, point, v_hat, r):
    """Points of the slice disk of radius r around `point` most likely to leave the body."""
    bodies = body.constraints if isinstance(body, Polytope) else (body,)
    probes = []
    for piece in bodies:
        if isinstance(piece, HalfSpace):
            n_perp = piece.normal - (piece.normal @ v_hat) * v_hat
            if np.linalg.norm(n_perp) <= 1e-15 * np.linalg.norm(piece.normal):
                probes.append((piece, point))
            else:
                probes.append((piece, point - r * _unit(n_perp)))
        else:
            w = point - piece.center
            w_perp = w - (w @ v_hat) * v_hat
            # rounding leaves |w_perp| ~ 1e-16 when the offset is parallel to v
            if np.linalg.norm(w_perp) > 1e-12 * max(1.0, np.linalg.norm(w)):
                direction = w_perp - (w_perp @ v_hat) * v_hat
            else:
                direction = _orthogonal_direction(v_hat)
            probes.append((piece, point + r * _unit(direction)))
    return probes


def _disk_inside(body, point, v_hat, r):
    return all(bool(contains(piece, probe)) for piece, probe in _worst_offsets(body, point, v_hat, r))


def _slice_closed_form(body, point, v_hat):
    if not contains(body, point):
        return 0.0
    if isinstance(body, Polytope):
        return min(_slice_closed_form(c, point, v_hat) for c in body.constraints)
    if isinstance(body, HalfSpace):
        n_perp = body.normal - (body.normal @ v_hat) * v_hat
        norm_perp = np.linalg.norm(n_perp)
        if norm_perp <= 1e-15 * np.linalg.norm(body.normal):
            return math.inf
        return float((point @ body.normal - body.offset) / norm_perp)
    w = point - body.center
    w_par = w @ v_hat
    w_perp = np.linalg.norm(w - w_par * v_hat)
    chord = math.sqrt(max(body.radius ** 2 - w_par ** 2, 0.0))
    return max(chord - w_perp, 0.0)


def _slice_bisection(body, point, v_hat, tol=1e-13):
    if not _disk_inside(body, point, v_hat, 0.0):
        return 0.0
    hi = 1.0
    while _disk_inside(body, point, v_hat, hi):
        hi *= 2.0
        if hi > SLICE_CAP:
            return math.inf
    lo = 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _disk_inside(body, point, v_hat, mid):
            lo = mid
        else:
            hi = mid
    return lo


def slice_width(body, a0, v, x0, s, method="bisection"):
    """
    Radius of the largest disk {y : <v, y> = 0, |y| <= r} with y + s x0 in D - a0.

    Returns math.inf for unbounded slices.

    Raises:
        InvalidAxis when <v, x0> <= 0
    """
    a0, v, x0 = (_points(body, np.asarray(z, dtype=float)) for z in (a0, v, x0))
    if not float(v @ x0) > 0:
        raise InvalidAxis("slice axis x0 must satisfy <v, x0> > 0", v_dot_x0=float(v @ x0))
    point = a0 + s * x0
    if body.dim == 1:
        # the hyperplane {<v, y> = 0} is the origin alone
        return math.inf if contains(body, point) else 0.0
    v_hat = _unit(v)
    if method == "closed_form":
        return _slice_closed_form(body, point, v_hat)
    return _slice_bisection(body, point, v_hat)


def check_slice_domination(body, dp, spec, grid, x0=None):
    """
    Check that the slices of D near a0 are at least tau(s) wide on a grid of s in (0, delta].

    The separating functional is dp.f_unit; x0 defaults to it.
    """
    x0 = dp.f_unit if x0 is None else np.asarray(x0, dtype=float)
    grid = sorted(float(s) for s in grid if 0 < s <= spec.delta)
    if not grid:
        raise ConfigError("slice grid has no points in (0, delta]")

    rows = []
    for s in grid:
        width = slice_width(body, dp.a0, dp.f_unit, x0, s)
        rows.append(SliceMargin(s=s, width=width, tau=spec.tau(s)))
    dominated = all(row.width >= row.tau for row in rows)
    logger.debug(f"Slice check ({spec.kind}, beta={spec.beta}) over {len(rows)} points: {dominated}")
    return SliceReport(dominated=dominated, rows=rows)


def sample_interior(body, rng, count, anchor=None, spread=1.0, max_rounds=200):
    """
    Draw `count` points of the open body.

    Balls are sampled uniformly; half-spaces and polytopes by rejection from
    a Gaussian cloud of width `spread` around `anchor` (default: an interior point).
    """
    d = body.dim
    if isinstance(body, Ball):
        directions = rng.standard_normal((count, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = body.radius * rng.random(count) ** (1.0 / d)
        return body.center + radii[:, None] * directions

    if anchor is None:
        if isinstance(body, HalfSpace):
            n_hat = _unit(body.normal)
            anchor = (body.offset / np.linalg.norm(body.normal) + spread) * n_hat
        else:
            anchor, _ = interior_point(body)
    anchor = np.asarray(anchor, dtype=float)

    accepted = []
    total = 0
    for _ in range(max_rounds):
        cloud = anchor + spread * rng.standard_normal((count, d))
        inside = cloud[contains(body, cloud)]
        accepted.append(inside)
        total += inside.shape[0]
        if total >= count:
            break
    points = np.concatenate(accepted)[:count]
    if points.shape[0] < count:
        logger.warning(f"Only {points.shape[0]} of {count} interior points accepted")
    return points
