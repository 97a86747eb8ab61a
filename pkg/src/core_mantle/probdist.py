"""Poisson probabilities and one-sided truncated Poisson samplers.

All mass functions are evaluated in log space. Samplers use inverse-CDF
lookup over an explicit (finite or quantile-capped) support, so there are
no rejection loops even when the conditioning event is rare.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

CONSTRAINTS = ("none", "at_least", "at_most", "less_than")

# the renormalised upper tail is cut at this quantile
_TAIL_CAP = 1e-12


def _check_rate(rate: float) -> float:
    rate = float(rate)
    if not rate >= 0.0 or math.isinf(rate):
        raise ValueError(f"Poisson rate must be finite and >= 0, got {rate!r}")
    return rate


def log_poisson_pmf(rate: float, x: int) -> float:
    rate = _check_rate(rate)
    if x < 0:
        return -math.inf
    if rate == 0.0:
        return 0.0 if x == 0 else -math.inf
    return x * math.log(rate) - rate - math.lgamma(x + 1)


def poisson_pmf(rate: float, x: int) -> float:
    """P[Po(rate) = x]."""
    return math.exp(log_poisson_pmf(rate, x))


def poisson_cdf(rate: float, z: int) -> float:
    """P[Po(rate) <= z]."""
    rate = _check_rate(rate)
    if z < 0:
        return 0.0
    if z + 1 <= rate + 1:
        # small lower tail: sum it directly rather than subtract from 1
        return min(1.0, math.fsum(poisson_pmf(rate, h) for h in range(z + 1)))
    return 1.0 - poisson_tail(rate, z + 1)


def poisson_tail(rate: float, z: int) -> float:
    """P[Po(rate) >= z].

    The shorter side of the distribution is summed directly, so small upper
    tails keep their relative precision.
    """
    rate = _check_rate(rate)
    if z <= 0:
        return 1.0
    if rate == 0.0:
        return 0.0
    if z <= rate + 1:
        lower = math.fsum(poisson_pmf(rate, h) for h in range(z))
        return min(1.0, max(0.0, 1.0 - lower))
    # terms decrease geometrically beyond the mode
    total, h = 0.0, z
    terms = []
    while True:
        term = poisson_pmf(rate, h)
        terms.append(term)
        total += term
        if term <= 1e-18 * total or term == 0.0:
            break
        h += 1
    return min(1.0, math.fsum(terms))


@dataclass(frozen=True)
class TruncatedPoissonSpec:
    """Po(rate) conditioned on a one-sided event ``X <constraint> threshold``.

    ``constraint`` is one of ``"none"``, ``"at_least"`` (X >= z),
    ``"at_most"`` (X <= z) or ``"less_than"`` (X < z).
    """

    rate: float
    constraint: str = "none"
    threshold: int = 0

    def __post_init__(self):
        _check_rate(self.rate)
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"unknown constraint {self.constraint!r}")
        if int(self.threshold) != self.threshold or self.threshold < 0:
            raise ValueError(f"threshold must be a nonnegative integer, got {self.threshold!r}")
        if self.event_probability() <= 0.0:
            raise ValueError(
                f"conditioning event has zero probability: Po({self.rate}) {self.constraint} {self.threshold}"
            )

    def event_probability(self) -> float:
        z = int(self.threshold)
        if self.constraint == "none":
            return 1.0
        if self.constraint == "at_least":
            return poisson_tail(self.rate, z)
        if self.constraint == "at_most":
            return poisson_cdf(self.rate, z)
        return poisson_cdf(self.rate, z - 1) if z > 0 else 0.0

    def support(self) -> tuple[int, int]:
        """Inclusive (lo, hi) support used by the sampler."""
        z = int(self.threshold)
        if self.constraint == "at_most":
            return 0, z
        if self.constraint == "less_than":
            return 0, z - 1
        lo = z if self.constraint == "at_least" else 0
        return lo, _upper_cap(self.rate, lo)

    def contains(self, x: int) -> bool:
        z = int(self.threshold)
        if x < 0:
            return False
        return {
            "none": True,
            "at_least": x >= z,
            "at_most": x <= z,
            "less_than": x < z,
        }[self.constraint]

    def pmf(self, x: int) -> float:
        """Exact conditional mass P[X = x | event]."""
        if not self.contains(x):
            return 0.0
        return poisson_pmf(self.rate, x) / self.event_probability()


def _upper_cap(rate: float, lo: int) -> int:
    """Smallest h >= lo with P[X > h | X >= lo] below the tail cap."""
    if rate == 0.0:
        return lo
    mass = poisson_tail(rate, lo)
    h = lo
    log_mass = math.log(mass)
    acc = 0.0
    while True:
        acc += math.exp(log_poisson_pmf(rate, h) - log_mass)
        if acc >= 1.0 - _TAIL_CAP or h > lo + 50 + 20 * rate:
            return h
        h += 1


@lru_cache(maxsize=512)
def _cdf_table(rate: float, constraint: str, threshold: int) -> tuple[int, np.ndarray]:
    spec = TruncatedPoissonSpec(rate, constraint, threshold)
    lo, hi = spec.support()
    xs = np.arange(lo, hi + 1)
    if rate == 0.0:
        logp = np.where(xs == 0, 0.0, -np.inf)
    else:
        logp = xs * math.log(rate) - rate - gammaln(xs + 1)
    w = np.exp(logp - logp.max())
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return lo, cdf


def sample_truncated_poisson(spec: TruncatedPoissonSpec, rng: np.random.Generator, size=None):
    """Draw from ``spec`` by inverse-CDF lookup.

    Returns a Python int when ``size`` is None, otherwise an int64 array.
    """
    lo, cdf = _cdf_table(float(spec.rate), spec.constraint, int(spec.threshold))
    u = rng.random(size)
    out = lo + np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    if size is None:
        return int(out)
    return out.astype(np.int64)


def truncated_poisson(rate: float, constraint: str, threshold: int, size, rng: np.random.Generator) -> np.ndarray:
    """Vector shorthand used by the tree samplers."""
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    return sample_truncated_poisson(TruncatedPoissonSpec(rate, constraint, int(threshold)), rng, size)
