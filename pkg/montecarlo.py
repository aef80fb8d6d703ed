#!/usr/bin/env python3
"""
Naive and exponentially tilted estimators of P(S_n in b_n D), and the
ratio experiments comparing them with the Gaussian limit.
"""

import logging
import math
from dataclasses import replace

import numpy as np
import pandas as pd

from asymptotics import gaussian_set_probability, theorem5_value
from convex_bodies import Ball, contains
from dominating import solve
from engine import DEFAULT_BLOCK_SIZE, Z95, EstimateReport, run_replications
from errors import ConfigError, CovarianceMismatch, ScheduleError, WeightBoundViolation
from tilting import GrowthSchedule, b_of, gaussian_partner, make_tilt

logger = logging.getLogger(__name__)

MIN_NAIVE_SAMPLES = 1000
WEIGHT_SLACK = 1e-9

RATIO_COLUMNS = ["n", "b_n", "rho", "p_sum", "p_sum_se", "p_gauss", "p_gauss_se",
                 "ratio", "ci_lo", "ci_hi", "theorem5", "ratio_theorem5"]


def estimate_naive(base, n, schedule, body, samples, seed, threads=1, block_size=DEFAULT_BLOCK_SIZE, stream=0):
    """Fraction of replications with S_n in b_n D; binomial standard error."""
    if samples < MIN_NAIVE_SAMPLES:
        raise ConfigError(f"naive estimation needs at least {MIN_NAIVE_SAMPLES} samples", samples=samples)
    b_n = b_of(schedule, n)

    def kernel(rng, count):
        sums = base.sample_sums(n, count, rng)
        return contains(body, sums / b_n).astype(float), None

    moments = run_replications(kernel, samples, seed, threads=threads, block_size=block_size, stream=stream)
    return EstimateReport.from_moments(moments, "naive", seed, n=n, b_n=b_n)


def estimate_tilted(base, n, schedule, body, dp, samples, seed, threads=1, block_size=DEFAULT_BLOCK_SIZE,
                    stream=0):
    """
    Importance sampling under the tilt theta = (b_n / n) v.

    Each replication contributes w 1{S_n in b_n D} with
    w = exp(-<theta, S_n> + n log m(theta)); on the event <theta, S_n> > 0,
    so log w never exceeds n log m(theta).

    Raises:
        CovarianceMismatch, WeightBoundViolation
    """
    if not dp.model.same_covariance(base.covariance()):
        raise CovarianceMismatch("dominating point was solved for a different covariance")
    b_n = b_of(schedule, n)
    sampler = make_tilt(base, dp, n, b_n)
    ceiling = n * sampler.log_normalizer

    def kernel(rng, count):
        sums = sampler.sample_sums(n, count, rng)
        log_w = sampler.log_weight(sums, n)
        inside = contains(body, sums / b_n)
        if inside.any() and log_w[inside].max() > ceiling + WEIGHT_SLACK * max(1.0, abs(ceiling)):
            raise WeightBoundViolation("importance weight exceeds exp(n log m(theta)) inside D",
                                       log_weight=float(log_w[inside].max()), ceiling=ceiling)
        weights = np.exp(log_w)
        return np.where(inside, weights, 0.0), weights

    moments = run_replications(kernel, samples, seed, threads=threads, block_size=block_size, stream=stream)
    report = EstimateReport.from_moments(moments, "tilted", seed, n=n, b_n=b_n)
    logger.debug(f"Tilted estimate n={n}: p={report.p_hat:.6e}, se={report.std_err:.3e}, ess={report.ess:.1f}")
    return report


def attach_variance_ratio(naive, tilted):
    """
    Fill vr_factor on both reports: the binomial variance at the tilted
    estimate over the per-sample variance of the weighted estimator.
    """
    per_sample = tilted.std_err ** 2 * tilted.samples
    if per_sample <= 0:
        return naive, tilted
    p = tilted.p_hat
    factor = p * (1.0 - p) / per_sample
    return replace(naive, vr_factor=factor), replace(tilted, vr_factor=factor)


def _ratio_interval(ratio, p_sum, p_gauss):
    rel = math.hypot(p_sum.std_err / p_sum.p_hat if p_sum.p_hat else 0.0,
                     p_gauss.std_err / p_gauss.p_hat if p_gauss.p_hat else 0.0)
    return ratio * (1.0 - Z95 * rel), ratio * (1.0 + Z95 * rel)


def ratio_experiment(base, body, schedule, n_list, samples, seed, threads=1, block_size=DEFAULT_BLOCK_SIZE):
    """
    P(S_n in b_n D) / P(G in rho_n D) over a list of n, with the ball
    formula as an extra column for balls.

    Returns:
        pandas.DataFrame with RATIO_COLUMNS, one row per n
    """
    if not (isinstance(schedule, GrowthSchedule) and schedule.theorem_mode):
        raise ScheduleError("ratio experiments need a theorem-mode schedule (1/2 < alpha < 2/3)")
    model = gaussian_partner(base)
    dp = solve(model, body)

    rows = []
    for index, n in enumerate(n_list):
        b_n = schedule.b(n)
        rho = schedule.rho(n)
        # substreams 2k and 2k + 1 keep the two estimates of every row independent
        p_sum = estimate_tilted(base, n, schedule, body, dp, samples, seed, threads=threads,
                                block_size=block_size, stream=2 * index)
        p_gauss = gaussian_set_probability(model, body, rho, samples, seed, tilted=True, dp=dp,
                                           threads=threads, block_size=block_size, stream=2 * index + 1)
        ratio = p_sum.p_hat / p_gauss.p_hat if p_gauss.p_hat > 0 else math.nan
        ci_lo, ci_hi = _ratio_interval(ratio, p_sum, p_gauss)
        formula = theorem5_value(model, body, n, schedule).value if isinstance(body, Ball) else math.nan
        rows.append({
            "n": n,
            "b_n": b_n,
            "rho": rho,
            "p_sum": p_sum.p_hat,
            "p_sum_se": p_sum.std_err,
            "p_gauss": p_gauss.p_hat,
            "p_gauss_se": p_gauss.std_err,
            "ratio": ratio,
            "ci_lo": ci_lo,
            "ci_hi": ci_hi,
            "theorem5": formula,
            "ratio_theorem5": p_sum.p_hat / formula if isinstance(body, Ball) else math.nan,
        })
        logger.info(f"n={n}: p_sum={p_sum.p_hat:.6e}, p_gauss={p_gauss.p_hat:.6e}, ratio={ratio:.4f}")
    return pd.DataFrame(rows, columns=RATIO_COLUMNS)
