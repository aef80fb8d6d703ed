#!/usr/bin/env python3
"""
Closed-form and quadrature evaluation of the Gaussian limit objects:
the upper-bound constant, Gaussian set probabilities, the ball formula and
the Cameron-Martin identity behind it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.laguerre import laggauss
from scipy import linalg
from scipy.stats import norm

from convex_bodies import Ball, HalfSpace, contains
from dominating import solve, solve_ball
from engine import DEFAULT_BLOCK_SIZE, EstimateReport, run_replications
from errors import ConfigError, DegenerateG2, DimensionMismatch, ScheduleError
from gauss_linalg import SpectralModel, build_gaussian, build_spectral, sample, spectral_gaussian
from tilting import GrowthSchedule, b_of

logger = logging.getLogger(__name__)

DEFLATION_TOL = 1e-10
MIN_QUAD_NODES = 16


@dataclass(frozen=True, eq=False)
class BallAsymptotic:
    dp: object = field(repr=False)
    b_geom: float
    g2_eigs: np.ndarray
    integral: float
    n: int
    b_n: float
    truncated_tail: Optional[float] = None
    nominal_tail: Optional[float] = None

    @property
    def scale(self):
        return self.b_n ** 2 / self.n

    @property
    def value(self):
        prefactor = (2.0 * math.pi * self.dp.sigma_g2 * self.scale) ** -0.5
        return prefactor * math.exp(-self.scale * self.dp.lambda_star) * self.integral

    def to_dict(self):
        payload = {
            "n": self.n,
            "b_n": self.b_n,
            "lambda_star": self.dp.lambda_star,
            "sigma_g2": self.dp.sigma_g2,
            "b_geom": self.b_geom,
            "g2_eigs": self.g2_eigs.tolist(),
            "integral": self.integral,
            "value": self.value,
        }
        if self.truncated_tail is not None:
            payload["truncated_tail"] = self.truncated_tail
            payload["nominal_tail"] = self.nominal_tail
        return payload


@dataclass(frozen=True)
class CameronMartinCheck:
    rho: float
    lhs: EstimateReport
    rhs: EstimateReport

    @property
    def combined_se(self):
        return math.hypot(self.lhs.std_err, self.rhs.std_err)

    @property
    def z_score(self):
        if self.combined_se == 0:
            return 0.0
        return abs(self.lhs.p_hat - self.rhs.p_hat) / self.combined_se

    def to_dict(self):
        return {"rho": self.rho, "lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict(),
                "combined_se": self.combined_se, "z_score": self.z_score}


@dataclass(frozen=True)
class FiniteRhoIntegral:
    rho: float
    sigma2: float
    integral: EstimateReport
    limit: float
    probability: Optional[float] = None

    @property
    def normalised(self):
        """I(rho) (2 pi rho^2 sigma^2)^(1/2); tends to `limit` as rho grows."""
        return self.integral.p_hat * math.sqrt(2.0 * math.pi * self.rho ** 2 * self.sigma2)

    def to_dict(self):
        payload = {"rho": self.rho, "sigma2": self.sigma2, "integral": self.integral.p_hat,
                   "std_err": self.integral.std_err, "normalised": self.normalised, "limit": self.limit}
        if self.probability is not None:
            payload["probability"] = self.probability
        return payload


def _as_model(model_or_spectral):
    if isinstance(model_or_spectral, SpectralModel):
        return spectral_gaussian(model_or_spectral), model_or_spectral
    return model_or_spectral, None


def _embed(ball, dim):
    """Pad the centre with zeros so that a low-dimensional ball lives in R^dim."""
    if ball.dim == dim:
        return ball
    if ball.dim > dim:
        raise DimensionMismatch(f"ball has dimension {ball.dim}, model has {dim}")
    center = np.zeros(dim)
    center[:ball.dim] = ball.center
    return Ball(center=center, radius=ball.radius)


def _halfspace_tail(model, hs, rho):
    spread = math.sqrt(float(hs.normal @ model.covariance @ hs.normal))
    return float(norm.sf(rho * hs.offset / spread))


def gaussian_set_probability(model, body, rho, samples=None, seed=None, tilted=False, dp=None,
                             threads=1, block_size=DEFAULT_BLOCK_SIZE, stream=0):
    """
    P(G in rho D) for G ~ N(0, S).

    Half-spaces use the normal tail; other bodies use Monte Carlo, either
    plain or with G shifted to rho a0 (the exact Gaussian tilt along v).
    """
    if rho < 0:
        raise ConfigError("rho must be non-negative", rho=rho)
    if rho == 0:
        return EstimateReport.exact(0.0)
    if isinstance(body, HalfSpace):
        return EstimateReport.exact(_halfspace_tail(model, body, rho))
    if samples is None:
        raise ConfigError("Monte Carlo evaluation needs a sample count")

    if not tilted:
        def kernel(rng, count):
            return contains(body, sample(model, rng, count) / rho).astype(float), None

        moments = run_replications(kernel, samples, seed, threads=threads, block_size=block_size, stream=stream)
        return EstimateReport.from_moments(moments, "naive", seed)

    dp = dp if dp is not None else solve(model, body)
    shift = rho * dp.a0
    log_norm = 0.5 * rho ** 2 * dp.sigma_g2

    def tilted_kernel(rng, count):
        points = shift + sample(model, rng, count)
        weights = np.exp(-rho * (points @ dp.v) + log_norm)
        return np.where(contains(body, points / rho), weights, 0.0), weights

    moments = run_replications(tilted_kernel, samples, seed, threads=threads, block_size=block_size,
                               stream=stream)
    return EstimateReport.from_moments(moments, "tilted", seed)


def cameron_martin_check(model, ball, rho, samples, seed, threads=1, block_size=DEFAULT_BLOCK_SIZE):
    """
    P(G in rho D) against exp(-rho^2 lambda(a0)) E[e^{-rho g(G)} 1{G in rho (D - a0)}].

    Both sides are sampled under the same seed on independent substreams.
    """
    lhs = gaussian_set_probability(model, ball, rho, samples, seed, threads=threads, block_size=block_size)
    dp = solve_ball(model, ball)
    shifted = Ball(center=ball.center - dp.a0, radius=ball.radius)

    def kernel(rng, count):
        points = sample(model, rng, count)
        inside = contains(shifted, points / rho)
        return np.where(inside, np.exp(-rho * (points @ dp.v)), 0.0), None

    moments = run_replications(kernel, samples, seed, threads=threads, block_size=block_size, stream=1)
    factor = math.exp(-rho ** 2 * dp.lambda_star)
    inner = EstimateReport.from_moments(moments, "cameron_martin", seed)
    rhs = EstimateReport(
        p_hat=factor * inner.p_hat,
        std_err=factor * inner.std_err,
        ci95=(factor * inner.ci95[0], factor * inner.ci95[1]),
        samples=inner.samples,
        method=inner.method,
        seed=seed,
    )
    check = CameronMartinCheck(rho=rho, lhs=lhs, rhs=rhs)
    logger.info(f"Cameron-Martin check at rho={rho}: lhs={lhs.p_hat:.6e}, rhs={rhs.p_hat:.6e}, "
                f"z={check.z_score:.2f}")
    return check


def weighted_chisq_laplace(eigs, c):
    """prod_j (1 + l_j / c)^(-1/2) = E exp(-Q / (2c)) for Q = sum_j l_j Z_j^2."""
    eigs = np.asarray(eigs, dtype=float).ravel()
    if np.any(eigs < 0):
        raise ConfigError("weighted chi-square eigenvalues must be non-negative")
    if not c > 0:
        raise ConfigError("Laplace argument must be positive", c=c)
    return math.exp(-0.5 * float(np.sum(np.log1p(eigs / c))))


def quadrature_integral(eigs, c, mc_samples, quad_nodes=128, seed=None, threads=1,
                        block_size=DEFAULT_BLOCK_SIZE):
    """
    int_0^inf e^{-s} P(Q <= 2 s c) ds with Gauss-Laguerre nodes in s and
    Monte Carlo over Q: each draw of Q contributes the weight mass of the
    nodes with s_k >= Q / (2c).
    """
    if quad_nodes < MIN_QUAD_NODES:
        raise ConfigError(f"quadrature needs at least {MIN_QUAD_NODES} nodes", quad_nodes=quad_nodes)
    if not c > 0:
        raise ConfigError("Laplace argument must be positive", c=c)
    eigs = np.asarray(eigs, dtype=float).ravel()
    nodes, weights = laggauss(quad_nodes)
    tail_mass = np.append(np.cumsum(weights[::-1])[::-1], 0.0)

    def kernel(rng, count):
        q = np.square(rng.standard_normal((count, eigs.size))) @ eigs
        return tail_mass[np.searchsorted(nodes, q / (2.0 * c), side="left")], None

    moments = run_replications(kernel, mc_samples, seed, threads=threads, block_size=block_size)
    return EstimateReport.from_moments(moments, "laguerre_mc", seed)


def g2_covariance(dp, covariance=None):
    """cov(G2) for G ~ N(0, C): C - C v v' C / v' C v; C defaults to the model covariance."""
    cov = dp.model.covariance if covariance is None else np.asarray(covariance, dtype=float)
    cv = cov @ dp.v
    return cov - np.outer(cv, cv) / float(dp.v @ cv)


def g2_eigenvalues(dp, covariance=None):
    """Eigenvalues of cov(G2) on the hyperplane {g = 0}, largest first."""
    eigenvalues, eigenvectors = linalg.eigh(g2_covariance(dp, covariance))
    normal = eigenvectors.T @ dp.f_unit
    keep = np.ones(eigenvalues.size, dtype=bool)
    keep[int(np.argmax(np.abs(normal)))] = False
    eigenvalues = eigenvalues[keep]
    if eigenvalues.size and eigenvalues.min() < -DEFLATION_TOL:
        raise DegenerateG2("cov(G2) has a negative eigenvalue after deflation",
                           smallest=float(eigenvalues.min()))
    return np.sort(np.clip(eigenvalues, 0.0, None))[::-1]


def _theorem_b(schedule, n):
    if isinstance(schedule, GrowthSchedule) and not schedule.theorem_mode:
        raise ScheduleError("ball asymptotics need a theorem-mode schedule", alpha=schedule.alpha)
    return b_of(schedule, n)


def theorem5_value(model_or_spectral, ball, n, schedule):
    """
    (2 pi sigma_g^2 b_n^2 / n)^(-1/2) exp(-(b_n^2 / n) lambda(a0)) I for a ball,
    with I = prod (1 + l_j / (b R^2))^(-1/2) over the eigenvalues of cov(G2)
    and 1/b = g(a - a0).
    """
    model, spectral = _as_model(model_or_spectral)
    b_n = _theorem_b(schedule, n)
    ball = _embed(ball, model.dim)
    dp = solve_ball(model, ball)
    b_geom = 1.0 / float(dp.v @ (ball.center - dp.a0))
    eigs = g2_eigenvalues(dp)
    integral = weighted_chisq_laplace(eigs, b_geom * ball.radius ** 2)
    result = BallAsymptotic(
        dp=dp,
        b_geom=b_geom,
        g2_eigs=eigs,
        integral=integral,
        n=n,
        b_n=b_n,
        truncated_tail=spectral.truncated_tail if spectral else None,
        nominal_tail=spectral.nominal_tail if spectral else None,
    )
    logger.debug(f"Ball formula at n={n}: b={b_geom:.6g}, I={integral:.10g}, value={result.value:.6e}")
    return result


def theorem1_upper(dp, n, schedule):
    """(2 pi sigma_g^2)^(-1/2) (sqrt(n) / b_n) exp(-(b_n^2 / n) lambda(a0))."""
    b_n = b_of(schedule, n)
    return ((2.0 * math.pi * dp.sigma_g2) ** -0.5 * math.sqrt(n) / b_n
            * math.exp(-(b_n ** 2 / n) * dp.lambda_star))


def finite_rho_ball_integral(model, ball, rho, samples, seed, quad_nodes=128, covariance=None,
                             threads=1, block_size=DEFAULT_BLOCK_SIZE):
    """
    I(rho) = E[e^{-rho g(G)} 1{G in rho (D - a0)}] for G ~ N(0, C) and a ball D.

    Splitting G = G1 + G2 along g and writing s = rho g(G),

        I(rho) = (2 pi rho^2 sigma^2)^(-1/2) int_0^inf e^{-s} h(s) e^{-s^2 / (2 rho^2 sigma^2)} ds,
        h(s) = P(|G2 - (s / rho) w|^2 < 2 s b R^2 - R^2 b^2 s^2 / rho^2),

    with sigma^2 = v' C v, x0 = a - a0 and w = b x0 - C v / sigma^2. The
    s-integral uses Gauss-Laguerre nodes and h is averaged over draws of G2.
    """
    if quad_nodes < MIN_QUAD_NODES:
        raise ConfigError(f"quadrature needs at least {MIN_QUAD_NODES} nodes", quad_nodes=quad_nodes)
    if not rho > 0:
        raise ConfigError("rho must be positive", rho=rho)
    dp = solve_ball(model, ball)
    cov = model.covariance if covariance is None else np.asarray(covariance, dtype=float)
    law = build_gaussian(cov)
    cv = cov @ dp.v
    sigma2 = float(dp.v @ cv)
    offset = ball.center - dp.a0
    b_geom = 1.0 / float(dp.v @ offset)
    w = b_geom * offset - cv / sigma2
    radius2 = ball.radius ** 2

    nodes, weights = laggauss(quad_nodes)
    t = nodes / rho
    bound = 2.0 * nodes * b_geom * radius2 - radius2 * b_geom ** 2 * t ** 2
    node_mass = weights * np.exp(-nodes ** 2 / (2.0 * rho ** 2 * sigma2))
    norm_const = (2.0 * math.pi * rho ** 2 * sigma2) ** -0.5

    def kernel(rng, count):
        g = sample(law, rng, count)
        g2 = g - np.outer(g @ dp.v, cv / sigma2)
        dist2 = (np.einsum("ij,ij->i", g2, g2)[:, None] - 2.0 * np.outer(g2 @ w, t)
                 + np.outer(np.ones(count), t ** 2 * float(w @ w)))
        return norm_const * ((dist2 < bound) @ node_mass), None

    moments = run_replications(kernel, samples, seed, threads=threads, block_size=block_size)
    integral = EstimateReport.from_moments(moments, "laguerre_mc", seed)
    limit = weighted_chisq_laplace(g2_eigenvalues(dp, cov), b_geom * radius2)
    probability = math.exp(-rho ** 2 * dp.lambda_star) * integral.p_hat if covariance is None else None
    return FiniteRhoIntegral(rho=rho, sigma2=sigma2, integral=integral, limit=limit, probability=probability)


def spectral_sweep(p, dims, n, schedule, center_scale=2.0, radius=1.0, rule="j^-p"):
    """Ball formula for a j^-p covariance at increasing truncation dimensions."""
    rows = []
    for dim in dims:
        spectral = build_spectral(p, dim, rule=rule)
        ball = Ball(center=np.eye(dim)[0] * center_scale, radius=radius)
        rows.append(theorem5_value(spectral, ball, n, schedule))
        logger.info(f"Spectral sweep d={dim}: I={rows[-1].integral:.10g}")
    return rows
