#!/usr/bin/env python3
"""
Dense Gaussian-measure primitives.

Validation and factorisation of covariance matrices, the Gaussian rate
function x'S^-1 x / 2, sampling through the Cholesky factor, and symmetric
positive definite square roots.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import zeta

from errors import DimensionMismatch, NotPositiveDefinite, NotSymmetric

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12
EIGEN_FLOOR = 1e-12


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Centered Gaussian law on R^d, immutable after construction."""

    dim: int
    covariance: np.ndarray
    lower_factor: np.ndarray
    inverse: np.ndarray
    spectral: Optional["SpectralModel"] = field(default=None, compare=False)

    def precision_times(self, x):
        """Solve covariance @ y = x through the Cholesky factor."""
        return linalg.cho_solve((self.lower_factor, True), np.asarray(x, dtype=float))

    def same_covariance(self, other, rtol=1e-10, atol=1e-12):
        other = np.asarray(other, dtype=float)
        if other.shape != self.covariance.shape:
            return False
        return bool(np.allclose(self.covariance, other, rtol=rtol, atol=atol))


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Truncated covariance operator with eigenvalues j^-p on the first `dim` coordinates."""

    eigenvalues: np.ndarray
    rule: str
    p: float
    dim: int
    truncated_tail: float
    nominal_tail: float


def _check_square(matrix):
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"covariance must be square, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NotPositiveDefinite("covariance has non-finite entries")


def _eigen_floor(matrix):
    return EIGEN_FLOOR * np.trace(matrix) / matrix.shape[0]


def build_gaussian(covariance, spectral=None):
    """
    Validate a covariance matrix and precompute its factorisation.

    Args:
        covariance: d x d symmetric positive definite matrix
        spectral: optional SpectralModel the matrix was generated from

    Returns:
        GaussianModel with lower Cholesky factor and inverse

    Raises:
        NotSymmetric, NotPositiveDefinite
    """
    matrix = np.atleast_2d(np.asarray(covariance, dtype=float))
    _check_square(matrix)

    scale = max(linalg.norm(matrix), np.finfo(float).tiny)
    if linalg.norm(matrix - matrix.T) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("covariance is not symmetric",
                           asymmetry=float(linalg.norm(matrix - matrix.T)))
    matrix = 0.5 * (matrix + matrix.T)

    smallest = float(linalg.eigvalsh(matrix)[0])
    floor = _eigen_floor(matrix)
    if not smallest > floor:
        raise NotPositiveDefinite("covariance is not strictly positive definite",
                                  smallest_eigenvalue=smallest, floor=float(floor))

    lower = linalg.cholesky(matrix, lower=True)
    inverse = linalg.cho_solve((lower, True), np.eye(matrix.shape[0]))
    inverse = 0.5 * (inverse + inverse.T)
    logger.debug(f"Built Gaussian model of dimension {matrix.shape[0]}, "
                 f"smallest eigenvalue {smallest:.3e}")

    return GaussianModel(
        dim=matrix.shape[0],
        covariance=_frozen(matrix),
        lower_factor=_frozen(lower),
        inverse=_frozen(inverse),
        spectral=spectral,
    )


def build_spectral(p, dim, rule="j^-p"):
    """Spectral model with eigenvalues j^-p, j = 1..dim."""
    if rule != "j^-p":
        raise NotPositiveDefinite(f"unknown spectral rule {rule!r}")
    if dim < 1:
        raise DimensionMismatch("spectral dimension must be positive")
    if p <= 0:
        raise NotPositiveDefinite("spectral exponent must be positive for decreasing eigenvalues")
    eigenvalues = np.arange(1, dim + 1, dtype=float) ** (-float(p))
    # Hurwitz zeta gives sum_{j>dim} j^-p; the series diverges for p <= 1.
    nominal_tail = float(zeta(p, dim + 1)) if p > 1 else float("inf")
    return SpectralModel(
        eigenvalues=_frozen(eigenvalues),
        rule=rule,
        p=float(p),
        dim=int(dim),
        truncated_tail=0.0,
        nominal_tail=nominal_tail,
    )


def spectral_gaussian(spectral):
    return build_gaussian(np.diag(spectral.eigenvalues), spectral=spectral)


def rate(model, x):
    """Gaussian rate function x' S^-1 x / 2; accepts a point or an (m, d) array of points."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dim:
        raise DimensionMismatch(f"point has dimension {x.shape[-1]}, model has {model.dim}")
    value = 0.5 * np.einsum("...i,ij,...j->...", x, model.inverse, x)
    return np.maximum(value, 0.0) if value.ndim else max(float(value), 0.0)


def sample(model, rng, size=None):
    """Draw x = L z with z standard normal; shape (d,) or (size, d)."""
    if size is None:
        return model.lower_factor @ rng.standard_normal(model.dim)
    return rng.standard_normal((size, model.dim)) @ model.lower_factor.T


def sqrt_spd(matrix):
    """
    Symmetric positive definite square root through the eigendecomposition.

    Raises:
        NotSymmetric, NotPositiveDefinite
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    _check_square(matrix)
    scale = max(linalg.norm(matrix), np.finfo(float).tiny)
    if linalg.norm(matrix - matrix.T) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("matrix is not symmetric")
    matrix = 0.5 * (matrix + matrix.T)

    eigenvalues, eigenvectors = linalg.eigh(matrix)
    if not eigenvalues[0] > _eigen_floor(matrix):
        raise NotPositiveDefinite("matrix is not strictly positive definite",
                                  smallest_eigenvalue=float(eigenvalues[0]))
    root = (eigenvectors * np.sqrt(eigenvalues)) @ eigenvectors.T
    return 0.5 * (root + root.T)
