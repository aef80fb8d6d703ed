#!/usr/bin/env python3
"""
Exact representation of P(S_n / b_n in D) as prefactor x J_n.

    P(S_n/b_n in D) = exp{-(b_n^2/n) lambda(a0) - (b_n^2/n)[sigma_g^2/2 - n b_n^-2 log E e^{g(b_n S_n/n)}]} J_n

with J_n the expectation of exp{-(b_n^2/n) g(S_n/b_n - a0)} 1{S_n/b_n in D}
under the tilted product law. The identity holds for every n and b_n; the
enumeration oracle below checks it to rounding error.
"""

import itertools
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln
from scipy.stats import norm

from convex_bodies import HalfSpace, contains
from engine import DEFAULT_BLOCK_SIZE, EstimateReport, run_replications
from errors import CovarianceMismatch, InvalidSet, NotEnumerable, TooLarge
from tilting import GaussianBase, tilt_with, tilted_mean

logger = logging.getLogger(__name__)

ENUMERATION_CAP = 10 ** 7


@dataclass(frozen=True)
class ReprDecomposition:
    probability: float
    prefactor: float
    j_n: float
    local_term: float
    mode: str
    n: int
    b_n: float

    @property
    def formula(self):
        return self.prefactor * self.j_n

    @property
    def gap(self):
        return abs(self.probability - self.formula)

    def to_dict(self):
        payload = asdict(self)
        payload["formula"] = self.formula
        payload["gap"] = self.gap
        return payload


def _enumerate_sums(atoms, probs, n):
    """Law of S_n over multisets of atoms: (distinct outcome sums, multinomial probabilities)."""
    k = atoms.shape[0]
    if n * math.log(k) > math.log(ENUMERATION_CAP) + 1e-12:
        raise TooLarge(f"{k}^{n} outcome tuples exceed the enumeration cap",
                       atoms=k, n=n, cap=ENUMERATION_CAP)
    combos = np.array(list(itertools.combinations_with_replacement(range(k), n)), dtype=np.int64)
    counts = np.stack([(combos == j).sum(axis=1) for j in range(k)], axis=1)
    log_mass = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + counts @ np.log(probs)
    return counts @ atoms, np.exp(log_mass)


def brute_force_probability(base, n, b_n, body):
    """
    Exact P(S_n in b_n D) by enumerating every outcome of n increments.

    Raises:
        TooLarge when atoms^n exceeds 10^7; NotEnumerable for continuous laws
    """
    atoms, probs = base.support()
    sums, mass = _enumerate_sums(atoms, probs, n)
    inside = contains(body, sums / b_n)
    return math.fsum(mass[inside])


def _check_partner(base, dp):
    if not dp.model.same_covariance(base.covariance()):
        raise CovarianceMismatch("dominating point was solved for a different covariance")


def _gaussian_halfspace_repr(base, n, b_n, body, dp):
    """Gaussian increments against a half-space: normal tail versus 1-D quadrature."""
    normal = body.normal
    if not np.allclose(dp.f_unit, normal / np.linalg.norm(normal), atol=1e-12):
        raise InvalidSet("dominating point does not belong to this half-space")
    sigma_u = math.sqrt(float(normal @ base.covariance() @ normal))
    probability = float(norm.sf(body.offset * b_n / (math.sqrt(n) * sigma_u)))

    scale = b_n ** 2 / n
    sigma_g = math.sqrt(dp.sigma_g2)
    rho_sigma = b_n / math.sqrt(n) * sigma_g
    # g(S_n) under the tilted law is N(b_n sigma_g^2, n sigma_g^2); t is its standardised excess
    local, _ = integrate.quad(lambda t: math.exp(-rho_sigma * t) * norm.pdf(t), 0.0, math.inf,
                              epsabs=0.0, epsrel=1e-12, limit=200)
    j_n = math.exp(scale * (dp.g(dp.a0) - dp.sigma_g2)) * local
    log_total = n * base.log_mgf((b_n / n) * dp.v)
    prefactor = math.exp(-scale * dp.lambda_star - scale * dp.sigma_g2 / 2 + log_total)
    return ReprDecomposition(probability, prefactor, j_n, local, "quadrature", n, b_n)


def repr_exact(base, n, b_n, body, dp):
    """
    Both sides of the representation identity, evaluated exactly.

    Raises:
        TooLarge, NotEnumerable, CovarianceMismatch
    """
    _check_partner(base, dp)
    if isinstance(base, GaussianBase):
        if not isinstance(body, HalfSpace):
            raise NotEnumerable("Gaussian increments are only evaluated exactly against half-spaces")
        return _gaussian_halfspace_repr(base, n, b_n, body, dp)

    probability = brute_force_probability(base, n, b_n, body)

    sampler = tilt_with(base, (b_n / n) * dp.v)
    sums, tilted_mass = _enumerate_sums(*sampler.support(), n)
    inside = contains(body, sums / b_n)
    scale = b_n ** 2 / n
    g_sums = sums @ dp.v

    j_n = math.fsum((tilted_mass * np.exp(-(b_n / n) * g_sums + scale * dp.g(dp.a0)))[inside])
    centre = b_n * float(tilted_mean(sampler) @ dp.v)
    local = math.fsum((tilted_mass * np.exp(-(b_n / n) * g_sums + centre))[inside])

    log_total = n * sampler.log_normalizer
    prefactor = math.exp(-scale * dp.lambda_star - scale * (dp.sigma_g2 / 2 - log_total / scale))
    decomposition = ReprDecomposition(probability, prefactor, j_n, local, "exact_enumeration", n, b_n)
    logger.debug(f"Representation n={n}, b_n={b_n}: P={probability:.17g}, gap={decomposition.gap:.3e}")
    return decomposition


def local_term_exact(base, n, b_n, body, dp):
    """E[e^{-g(T_n - E T_n)} 1{T_n in b_n^2 D / n}] by enumeration."""
    return repr_exact(base, n, b_n, body, dp).local_term


def jn_estimate(sampler, dp, n, b_n, body, samples, seed, threads=1, block_size=DEFAULT_BLOCK_SIZE):
    """Monte Carlo estimate of the local term with T_n = (b_n / n) (Z_1 + ... + Z_n)."""
    centre = n * float(tilted_mean(sampler) @ dp.v)

    def kernel(rng, count):
        sums = sampler.sample_sums(n, count, rng)
        inside = contains(body, sums / b_n)
        values = np.where(inside, np.exp(-(b_n / n) * (sums @ dp.v - centre)), 0.0)
        return values, None

    moments = run_replications(kernel, samples, seed, threads=threads, block_size=block_size)
    return EstimateReport.from_moments(moments, "tilted_local", seed, n=n, b_n=b_n)


def theorem1_prefactor(dp, n, b_n):
    """exp{-(b_n^2 / n) lambda(a0)}."""
    if not dp.lambda_star > 0:
        raise InvalidSet("rate at the dominating point must be positive (0 is in the closure)")
    return math.exp(-(b_n ** 2 / n) * dp.lambda_star)
