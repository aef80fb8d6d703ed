#!/usr/bin/env python3
"""
Deterministic parallel replication engine.

Replications are grouped in fixed-size blocks. Block k draws from its own
generator keyed by (seed, k), blocks run on a thread pool, and their partial
sums are merged in block order. Results therefore depend on (seed, samples,
block_size) only, never on the number of workers.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

from errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 4096
Z95 = 1.959963984540054

CSV_COLUMNS = ["n", "b_n", "method", "p_hat", "std_err", "ci_lo", "ci_hi", "ess", "samples", "seed"]


def block_rng(seed, block, stream=0):
    """Counter-derived generator for block `block` of substream `stream` under `seed`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, block))))


@dataclass(frozen=True)
class Moments:
    count: int
    total: float
    total_sq: float
    hits: int
    weight_sum: Optional[float] = None
    weight_sq_sum: Optional[float] = None

    @property
    def mean(self):
        return self.total / self.count

    @property
    def variance(self):
        if self.count < 2:
            return 0.0
        return max((self.total_sq - self.count * self.mean ** 2) / (self.count - 1), 0.0)

    @property
    def std_err(self):
        return math.sqrt(self.variance / self.count)

    @property
    def ess(self):
        if not self.weight_sq_sum:
            return None
        return self.weight_sum ** 2 / self.weight_sq_sum


def _block_partials(kernel, seed, stream, block, count):
    values, weights = kernel(block_rng(seed, block, stream), count)
    values = np.asarray(values, dtype=float)
    partial = [float(values.sum()), float(np.square(values).sum()), int(np.count_nonzero(values))]
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        partial += [float(weights.sum()), float(np.square(weights).sum())]
    return partial


def run_replications(kernel, samples, seed, threads=1, block_size=DEFAULT_BLOCK_SIZE, stream=0):
    """
    Run `samples` replications of `kernel(rng, count) -> (values, weights)`.

    `weights` may be None; when given they are the importance weights behind
    `values` and feed the effective sample size. Distinct `stream` values give
    independent replications under the same seed.
    """
    if seed is None:
        raise ConfigError("stochastic runs need an explicit seed")
    if samples < 1:
        raise ConfigError("samples must be positive", samples=samples)
    blocks = [(k, min(block_size, samples - k * block_size)) for k in range(math.ceil(samples / block_size))]

    def run(block):
        index, count = block
        return _block_partials(kernel, seed, stream, index, count)

    if threads and threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(run, blocks))
    else:
        partials = [run(block) for block in blocks]

    columns = list(zip(*partials))
    weighted = len(columns) == 5
    logger.debug(f"Merged {len(blocks)} blocks of up to {block_size} replications (threads={threads})")
    return Moments(
        count=samples,
        total=math.fsum(columns[0]),
        total_sq=math.fsum(columns[1]),
        hits=int(sum(columns[2])),
        weight_sum=math.fsum(columns[3]) if weighted else None,
        weight_sq_sum=math.fsum(columns[4]) if weighted else None,
    )


@dataclass
class EstimateReport:
    p_hat: float
    std_err: float
    ci95: Tuple[float, float]
    samples: int
    method: str
    seed: Optional[int] = None
    ess: Optional[float] = None
    vr_factor: Optional[float] = None
    ci_unreliable: bool = False
    n: Optional[int] = None
    b_n: Optional[float] = None

    @classmethod
    def from_moments(cls, moments, method, seed, n=None, b_n=None):
        p_hat, std_err = moments.mean, moments.std_err
        unreliable = method == "naive" and moments.hits < 10
        if unreliable:
            logger.warning(f"Naive estimate {p_hat:.3e} rests on {moments.hits} hits; CI unreliable")
        return cls(
            p_hat=p_hat,
            std_err=std_err,
            ci95=(p_hat - Z95 * std_err, p_hat + Z95 * std_err),
            samples=moments.count,
            method=method,
            seed=seed,
            ess=moments.ess,
            ci_unreliable=unreliable,
            n=n,
            b_n=b_n,
        )

    @classmethod
    def exact(cls, value, method="closed_form", n=None, b_n=None):
        return cls(p_hat=value, std_err=0.0, ci95=(value, value), samples=0, method=method, n=n, b_n=b_n)

    def to_dict(self):
        payload = asdict(self)
        payload["ci95"] = list(self.ci95)
        return payload

    def csv_row(self):
        return {
            "n": self.n,
            "b_n": self.b_n,
            "method": self.method,
            "p_hat": self.p_hat,
            "std_err": self.std_err,
            "ci_lo": self.ci95[0],
            "ci_hi": self.ci95[1],
            "ess": self.ess,
            "samples": self.samples,
            "seed": self.seed,
        }
