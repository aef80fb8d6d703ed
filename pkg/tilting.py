#!/usr/bin/env python3
"""
Increment laws with closed-form moment generating functions and their
exponential tilts.

For a tilt vector theta the tilted law has density e^<theta, x> / m(theta)
with respect to the base law. With theta = (b_n / n) v this is the law of
Z^(n); every family here has an exact sampler and exact tilted moments.
"""

import itertools
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp, softmax

from errors import ConfigError, DimensionMismatch, NotEnumerable, ScheduleError
from gauss_linalg import build_gaussian

logger = logging.getLogger(__name__)

THEOREM_ALPHA_MAX = 2.0 / 3.0


def _log_cosh(x):
    return np.logaddexp(x, -x) - math.log(2.0)


class BaseDistribution(ABC):
    """Mean-zero increment law X with finite exponential moments everywhere."""

    dim: int

    def _theta(self, theta):
        theta = np.zeros(self.dim) if theta is None else np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.dim,):
            raise DimensionMismatch(f"tilt has shape {theta.shape}, law has dimension {self.dim}")
        return theta

    @abstractmethod
    def log_mgf(self, theta):
        """log E e^<theta, X>."""

    @abstractmethod
    def covariance(self):
        """Covariance of the untilted law."""

    @abstractmethod
    def tilted_mean(self, theta):
        pass

    @abstractmethod
    def tilted_covariance(self, theta):
        pass

    @abstractmethod
    def sample(self, rng, size, theta=None):
        """`size` independent increments under the tilted law, shape (size, d)."""

    @abstractmethod
    def sample_sums(self, n, size, rng, theta=None):
        """`size` independent sums of n tilted increments, shape (size, d)."""

    def support(self, theta=None):
        """Atoms and tilted probabilities for exact enumeration."""
        raise NotEnumerable(f"{type(self).__name__} has no finite support")

    def to_dict(self):
        raise NotImplementedError


class GaussianBase(BaseDistribution):
    def __init__(self, model):
        self.model = model
        self.dim = model.dim

    def log_mgf(self, theta):
        theta = self._theta(theta)
        return 0.5 * float(theta @ self.model.covariance @ theta)

    def covariance(self):
        return np.array(self.model.covariance)

    def tilted_mean(self, theta):
        # Cameron-Martin: tilting a centered Gaussian shifts it by S theta
        return self.model.covariance @ self._theta(theta)

    def tilted_covariance(self, theta):
        return self.covariance()

    def sample(self, rng, size, theta=None):
        shift = self.tilted_mean(theta)
        return shift + rng.standard_normal((size, self.dim)) @ self.model.lower_factor.T

    def sample_sums(self, n, size, rng, theta=None):
        shift = n * self.tilted_mean(theta)
        return shift + math.sqrt(n) * (rng.standard_normal((size, self.dim)) @ self.model.lower_factor.T)

    def to_dict(self):
        return {"type": "gaussian", "covariance": self.model.covariance.tolist()}


class DiscreteBase(BaseDistribution):
    def __init__(self, atoms, probs):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (atoms.shape[0],):
            raise ConfigError("discrete law needs one probability per atom")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ConfigError("discrete probabilities must be positive and sum to 1")
        if np.linalg.norm(probs @ atoms) > 1e-12:
            raise ConfigError("discrete law must have mean zero", mean=(probs @ atoms).tolist())
        self.atoms = atoms
        self.probs = probs
        self.dim = atoms.shape[1]

    def tilted_probs(self, theta):
        return softmax(np.log(self.probs) + self.atoms @ self._theta(theta))

    def log_mgf(self, theta):
        return float(logsumexp(np.log(self.probs) + self.atoms @ self._theta(theta)))

    def covariance(self):
        return (self.atoms * self.probs[:, None]).T @ self.atoms

    def tilted_mean(self, theta):
        return self.tilted_probs(theta) @ self.atoms

    def tilted_covariance(self, theta):
        q = self.tilted_probs(theta)
        centred = self.atoms - q @ self.atoms
        return (centred * q[:, None]).T @ centred

    def sample(self, rng, size, theta=None):
        index = rng.choice(self.atoms.shape[0], size=size, p=self.tilted_probs(theta))
        return self.atoms[index]

    def sample_sums(self, n, size, rng, theta=None):
        counts = rng.multinomial(n, self.tilted_probs(theta), size=size)
        return counts @ self.atoms

    def support(self, theta=None):
        return self.atoms, self.tilted_probs(theta)

    def to_dict(self):
        return {"type": "discrete", "atoms": self.atoms.tolist(), "probs": self.probs.tolist()}


class RademacherProduct(BaseDistribution):
    """Independent coordinates X_j = +-s_j with probability 1/2 each."""

    def __init__(self, scales):
        scales = np.atleast_1d(np.asarray(scales, dtype=float))
        if np.any(scales <= 0):
            raise ConfigError("Rademacher scales must be positive")
        self.scales = scales
        self.dim = scales.shape[0]

    def plus_probs(self, theta):
        # e^{t s} / (2 cosh(t s)) = logistic(2 t s)
        return expit(2.0 * self._theta(theta) * self.scales)

    def log_mgf(self, theta):
        return float(np.sum(_log_cosh(self._theta(theta) * self.scales)))

    def covariance(self):
        return np.diag(self.scales ** 2)

    def tilted_mean(self, theta):
        return self.scales * np.tanh(self._theta(theta) * self.scales)

    def tilted_covariance(self, theta):
        return np.diag(self.scales ** 2 / np.cosh(self._theta(theta) * self.scales) ** 2)

    def sample(self, rng, size, theta=None):
        plus = rng.random((size, self.dim)) < self.plus_probs(theta)
        return np.where(plus, self.scales, -self.scales)

    def sample_sums(self, n, size, rng, theta=None):
        ups = rng.binomial(n, self.plus_probs(theta), size=(size, self.dim))
        return self.scales * (2.0 * ups - n)

    def support(self, theta=None):
        p = self.plus_probs(theta)
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=self.dim)))
        atoms = signs * self.scales
        probs = np.prod(np.where(signs > 0, p, 1.0 - p), axis=1)
        return atoms, probs

    def to_dict(self):
        return {"type": "rademacher", "scales": self.scales.tolist()}


@dataclass(frozen=True)
class GrowthSchedule:
    """b(n) = c n^alpha with 1/2 < alpha < 2/3 (theorem mode) or < 1 (demo mode)."""

    c: float
    alpha: float
    theorem_mode: bool = True

    def __post_init__(self):
        if not self.c > 0:
            raise ScheduleError("schedule constant c must be positive", c=self.c)
        if not self.alpha > 0.5:
            raise ScheduleError("schedule needs alpha > 1/2", alpha=self.alpha)
        if self.theorem_mode and not self.alpha < THEOREM_ALPHA_MAX:
            raise ScheduleError("theorem-mode schedule needs alpha < 2/3", alpha=self.alpha)
        if not self.alpha < 1.0:
            raise ScheduleError("schedule needs alpha < 1", alpha=self.alpha)
        if not self.alpha < THEOREM_ALPHA_MAX:
            logger.warning(f"alpha={self.alpha} is outside the sharp-asymptotics range (1/2, 2/3)")

    @classmethod
    def through(cls, n, b_n, alpha, theorem_mode=False):
        """Schedule with the given exponent passing through (n, b_n)."""
        return cls(c=b_n / n ** alpha, alpha=alpha, theorem_mode=theorem_mode)

    def b(self, n):
        return self.c * n ** self.alpha

    def rho(self, n):
        return self.b(n) / math.sqrt(n)


def b_of(schedule, n):
    """Normaliser b_n from a GrowthSchedule or a plain number."""
    if schedule is None:
        raise ConfigError("a schedule {c, alpha} or a fixed b_n is required")
    if isinstance(schedule, GrowthSchedule):
        return schedule.b(n)
    return float(schedule)


@dataclass(frozen=True, eq=False)
class TiltedSampler:
    base: BaseDistribution
    theta: np.ndarray
    log_normalizer: float
    probs: Optional[np.ndarray] = None

    def sample(self, rng, size):
        return self.base.sample(rng, size, self.theta)

    def sample_sums(self, n, size, rng):
        return self.base.sample_sums(n, size, rng, self.theta)

    def support(self):
        return self.base.support(self.theta)

    def log_weight(self, sums, n):
        """Log likelihood ratio base/tilted for sums of n increments."""
        return -(np.asarray(sums) @ self.theta) + n * self.log_normalizer


def tilt_with(base, theta):
    theta = base._theta(theta)
    probs = base.tilted_probs(theta) if isinstance(base, DiscreteBase) else None
    return TiltedSampler(base=base, theta=theta, log_normalizer=base.log_mgf(theta), probs=probs)


def mgf(base, theta):
    return math.exp(base.log_mgf(theta))


def make_tilt(base, dp, n, schedule):
    """Tilted law of Z^(n): theta = (b_n / n) v."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    return tilt_with(base, (b_of(schedule, n) / n) * dp.v)


def tilted_mean(sampler):
    return sampler.base.tilted_mean(sampler.theta)


def tilted_covariance(sampler):
    return sampler.base.tilted_covariance(sampler.theta)


def tilted_variance_g(sampler, dp):
    """sigma_{g,n}^2 = E g^2(Z - E Z) under the tilted law."""
    return float(dp.v @ tilted_covariance(sampler) @ dp.v)


def scaled_log_mgf(base, f_vec, n, schedule):
    """n b_n^-2 log E e^{f(b_n S_n / n)} = (n / b_n)^2 log m((b_n / n) f)."""
    h = b_of(schedule, n) / n
    return base.log_mgf(h * np.asarray(f_vec, dtype=float)) / h ** 2


def covariance(base):
    return base.covariance()


def gaussian_partner(base):
    """The Gaussian model with the covariance of `base`; rejects degenerate laws."""
    if isinstance(base, GaussianBase):
        return base.model
    return build_gaussian(base.covariance())
