#!/usr/bin/env python3
"""
Dominating points of open convex sets with respect to a Gaussian law.

The dominating point a0 minimises the rate x' S^-1 x / 2 over the closure of
D. The supporting functional is g(x) = <v, x> with v = S^-1 a0, so that
S v = a0, g(a0) = sigma_g^2 = 2 lambda(a0) and D lies in {g >= g(a0)}.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, nnls

from convex_bodies import Ball, HalfSpace, Polytope, contains, interior_point, sample_interior
from errors import EmptyPolytope, InvalidSet, NoConvergence, NumericalFailure, SupportViolation
from gauss_linalg import rate

logger = logging.getLogger(__name__)

KKT_TOL = 1e-9
ACTIVE_TOL = 1e-9
MAX_SWEEPS = 100_000


@dataclass(frozen=True, eq=False)
class DominatingPoint:
    a0: np.ndarray
    lambda_star: float
    v: np.ndarray
    sigma_g2: float
    f_unit: np.ndarray
    t0: float
    model: object = field(repr=False)
    kkt_residual: float = 0.0
    multipliers: Optional[np.ndarray] = None

    def g(self, x):
        return np.asarray(x, dtype=float) @ self.v

    def to_dict(self):
        payload = {
            "a0": self.a0.tolist(),
            "lambda_star": self.lambda_star,
            "v": self.v.tolist(),
            "sigma_g2": self.sigma_g2,
            "f_unit": self.f_unit.tolist(),
            "t0": self.t0,
            "kkt_residual": self.kkt_residual,
        }
        if self.multipliers is not None:
            payload["multipliers"] = self.multipliers.tolist()
        return payload


@dataclass(frozen=True)
class PolytopeCertificate:
    multipliers: np.ndarray
    residual: float
    active: tuple


@dataclass(frozen=True)
class SupportReport:
    min_margin: float
    samples: int
    argmin: np.ndarray


def _assemble(model, a0, v, kkt_residual=0.0, multipliers=None):
    t0 = float(np.linalg.norm(v))
    return DominatingPoint(
        a0=a0,
        lambda_star=rate(model, a0),
        v=v,
        sigma_g2=float(v @ model.covariance @ v),
        f_unit=v / t0,
        t0=t0,
        model=model,
        kkt_residual=float(kkt_residual),
        multipliers=multipliers,
    )


def solve_halfspace(model, hs):
    """Closed form a0 = c S u / (u' S u) for D = {<u, x> > c}."""
    if not hs.offset > 0:
        raise InvalidSet("half-space closure contains the origin", offset=hs.offset)
    spread = float(hs.normal @ model.covariance @ hs.normal)
    a0 = hs.offset * (model.covariance @ hs.normal) / spread
    v = hs.offset * hs.normal / spread
    return _assemble(model, a0, v)


def solve_ball(model, ball):
    """
    Nearest point of the ball in the S^-1 metric.

    KKT gives S^-1 x = mu (a - x), i.e. x(mu) = mu (S^-1 + mu I)^-1 a; the
    distance |x(mu) - a| decreases in mu and mu is found by bracketing.
    """
    center, radius = ball.center, ball.radius
    if not np.linalg.norm(center) > radius:
        raise InvalidSet("ball closure contains the origin",
                         center_norm=float(np.linalg.norm(center)), radius=radius)

    eigenvalues, eigenvectors = np.linalg.eigh(model.covariance)
    rotated = eigenvectors.T @ center

    def gap(mu):
        return float(np.linalg.norm(rotated / (1.0 + mu * eigenvalues))) - radius

    mu_lo, mu_hi = 1e-12, 1.0
    for _ in range(200):
        if gap(mu_hi) < 0:
            break
        mu_hi *= 2.0
    else:
        raise NoConvergence("ball multiplier bracket did not close", mu_hi=mu_hi)

    mu = brentq(gap, mu_lo, mu_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    a0 = eigenvectors @ (mu * eigenvalues / (1.0 + mu * eigenvalues) * rotated)
    # snap onto the sphere
    offset = a0 - center
    a0 = center + radius * offset / np.linalg.norm(offset)
    v = model.precision_times(a0)
    logger.debug(f"Ball multiplier mu={mu:.6e}, a0={a0}")
    return _assemble(model, a0, v)


def _dykstra(point, normals, offsets, sweeps, tol=1e-15):
    """Euclidean projection of `point` onto {y : normals @ y >= offsets} by Dykstra's algorithm."""
    x = point.copy()
    increments = np.zeros((normals.shape[0], point.shape[0]))
    sq_norms = np.einsum("ij,ij->i", normals, normals)
    for sweep in range(1, sweeps + 1):
        previous = x.copy()
        for i in range(normals.shape[0]):
            y = x + increments[i]
            shortfall = offsets[i] - normals[i] @ y
            x = y + (shortfall / sq_norms[i]) * normals[i] if shortfall > 0 else y
            increments[i] = y - x
        if np.linalg.norm(x - previous) <= tol * max(1.0, np.linalg.norm(x)):
            return x, sweep
    return x, sweeps


def _polish(y, normals, offsets, threshold):
    """Equality-constrained minimum-norm point on the near-active set, with NNLS multipliers."""
    norms = np.linalg.norm(normals, axis=1)
    slack = (normals @ y - offsets) / norms
    active = np.flatnonzero(slack < threshold)
    w_active = normals[active]
    if active.size == 0:
        # unconstrained minimiser is the origin
        candidate = np.zeros_like(y)
    else:
        candidate, *_ = np.linalg.lstsq(w_active, offsets[active], rcond=None)
    if np.min((normals @ candidate - offsets) / norms) < -ACTIVE_TOL * max(1.0, np.linalg.norm(candidate)):
        return None
    if active.size == 0:
        return candidate, active, np.zeros(0)
    weights, _ = nnls(w_active.T, candidate)
    return candidate, active, weights


def min_rate_point(model, poly, start=None, step=0.5, max_sweeps=MAX_SWEEPS):
    """
    Minimise x' S^-1 x / 2 over the closed polytope.

    Works in whitened coordinates x = L y, where the objective is |y|^2 / 2:
    projected-gradient steps y <- P((1 - step) y) with P computed by Dykstra's
    alternating projections, each followed by an active-set polish that is
    accepted once its KKT certificate S^-1 a0 = sum mu_i v_i, mu >= 0 holds.

    Returns:
        (a0, PolytopeCertificate)

    Raises:
        NoConvergence after max_sweeps Dykstra sweeps
    """
    lower = model.lower_factor
    normals = poly.normals @ lower
    offsets = poly.offsets
    y = np.zeros(model.dim) if start is None else np.linalg.solve(lower, np.asarray(start, dtype=float))

    used = 0
    while used < max_sweeps:
        y, sweeps = _dykstra((1.0 - step) * y, normals, offsets, min(1000, max_sweeps - used))
        used += sweeps
        for threshold in (ACTIVE_TOL, 1e-7, 1e-5, 1e-3):
            polished = _polish(y, normals, offsets, threshold * max(1.0, np.linalg.norm(y)))
            if polished is None:
                continue
            candidate, active, weights = polished
            a0 = lower @ candidate
            multipliers = np.zeros(len(offsets))
            multipliers[active] = weights
            residual = float(np.linalg.norm(model.precision_times(a0) - poly.normals.T @ multipliers))
            if residual < KKT_TOL * max(1.0, float(np.linalg.norm(candidate))):
                logger.debug(f"Polytope solver converged after {used} sweeps, "
                             f"active={active.tolist()}, residual={residual:.2e}")
                return a0, PolytopeCertificate(multipliers, residual, tuple(active.tolist()))
    raise NoConvergence("polytope solver exceeded its sweep budget", sweeps=used)


def solve_polytope(model, poly, start=None):
    """
    Dominating point of a polytope with a KKT certificate.

    Raises:
        EmptyPolytope, InvalidSet, NoConvergence
    """
    _, slack = interior_point(poly)
    if slack < -ACTIVE_TOL:
        raise EmptyPolytope("polytope closure is empty", slack=slack)
    a0, certificate = min_rate_point(model, poly, start=start)
    if not np.linalg.norm(a0) > ACTIVE_TOL:
        raise InvalidSet("polytope closure contains the origin")
    v = model.precision_times(a0)
    return _assemble(model, a0, v, kkt_residual=certificate.residual, multipliers=certificate.multipliers)


def solve(model, body):
    if isinstance(body, HalfSpace):
        return solve_halfspace(model, body)
    if isinstance(body, Ball):
        return solve_ball(model, body)
    if isinstance(body, Polytope):
        return solve_polytope(model, body)
    raise InvalidSet(f"unsupported body type {type(body).__name__}")


def verify_support(model, body, dp, samples, rng):
    """
    Sample points of D and confirm g(x) >= g(a0) on all of them.

    Raises:
        SupportViolation with the offending point; NumericalFailure when no sample lands in D
    """
    spread = 0.5 * max(1.0, float(np.linalg.norm(dp.a0)))
    anchor = None if isinstance(body, Ball) else dp.a0 + 0.1 * spread * dp.f_unit
    points = sample_interior(body, rng, samples, anchor=anchor, spread=spread)
    points = points[contains(body, points)]
    if points.shape[0] == 0:
        raise NumericalFailure("no interior points of D were accepted for the support check", samples=samples)
    margins = points @ dp.v - dp.g(dp.a0)
    worst = int(np.argmin(margins))
    min_margin = float(margins[worst])
    if min_margin < -1e-9 * max(1.0, abs(dp.g(dp.a0))):
        raise SupportViolation("a point of D lies below the supporting hyperplane",
                               witness=points[worst].tolist(), margin=min_margin)
    return SupportReport(min_margin=min_margin, samples=int(points.shape[0]), argmin=points[worst])
