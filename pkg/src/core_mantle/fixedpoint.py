"""Fixed-point quantities of the k-core recursion.

``phi(p) = P[Po(d p) >= k - 1]`` is the probability that a vertex of a
Po(d) Galton-Watson tree sends a 1-message upward when each of its children
does so independently with probability ``p``. Its largest fixed point
``p_star`` governs the core: the core density is ``P[Po(d p_star) >= k]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .probdist import poisson_cdf, poisson_pmf, poisson_tail

MAX_ITER = 100_000
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
THRESHOLD_BRACKET = (1e-3, 100.0)


class SubcriticalError(ValueError):
    """Raised when the only reachable fixed point of phi is 0 (d below d_k)."""

    def __init__(self, d, k, message=None):
        self.d, self.k = d, k
        if message is None:
            message = f"d={d} is subcritical for k={k} (core threshold d_k={threshold_d_k(k):.6f})"
        super().__init__(message)


@dataclass(frozen=True)
class CoreParams:
    d: float
    k: int

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"average degree must be positive, got {self.d}")
        if int(self.k) != self.k or self.k < 3:
            raise ValueError(f"k must be an integer >= 3, got {self.k}")


@dataclass(frozen=True)
class FixedPointResult:
    params: CoreParams
    p_star: float
    q: float
    q_bar: float
    psi: float
    iterations: int
    residual: float

    @property
    def lambda_k(self) -> float:
        """Larger root of d = lam / P[Po(lam) >= k-1]; equals d * p_star."""
        return self.params.d * self.p_star


def phi(params: CoreParams, p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return poisson_tail(params.d * p, params.k - 1)


def mark_density(params: CoreParams, p_prev: float) -> float:
    """P[Po(d p_prev) >= k]: probability that a tree root is marked 1."""
    return poisson_tail(params.d * p_prev, params.k)


def q_of(params: CoreParams, p: float) -> float:
    """P[Po(dp) = k-1 | Po(dp) >= k-1]."""
    rate = params.d * p
    tail = poisson_tail(rate, params.k - 1)
    if tail <= 0.0:
        raise ValueError(f"q undefined: P[Po({rate}) >= {params.k - 1}] = 0")
    return poisson_pmf(rate, params.k - 1) / tail


def q_bar_of(params: CoreParams, p: float) -> float:
    """P[Po(dp) = k-2 | Po(dp) <= k-2]."""
    rate = params.d * p
    head = poisson_cdf(rate, params.k - 2)
    if head <= 0.0:
        raise ValueError(f"q_bar undefined: P[Po({rate}) <= {params.k - 2}] = 0")
    return poisson_pmf(rate, params.k - 2) / head


def density_trajectory(params: CoreParams, t_max: int) -> list[float]:
    """[p^(0), ..., p^(t_max)] with p^(0) = 1 and p^(t+1) = phi(p^(t))."""
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    traj = [1.0]
    for _ in range(t_max):
        traj.append(phi(params, traj[-1]))
    return traj


def solve_p_star(params: CoreParams, tol: float = 1e-12) -> FixedPointResult:
    """Largest fixed point of phi by iteration from p = 1.

    phi is a contraction on [p_star, 1] and the iterates decrease
    monotonically into that interval, so plain iteration converges to the
    largest fixed point. Raises SubcriticalError when the iterates collapse
    to 0.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    p = 1.0
    for it in range(1, MAX_ITER + 1):
        nxt = phi(params, p)
        if nxt > p:
            raise AssertionError(f"phi iterates increased at step {it}: {p} -> {nxt}")
        change = p - nxt
        p = nxt
        if p < 10 * tol:
            raise SubcriticalError(params.d, params.k)
        if change < tol:
            break
    else:
        raise RuntimeError(f"fixed-point iteration did not converge in {MAX_ITER} steps")
    residual = abs(phi(params, p) - p)
    return FixedPointResult(
        params=params,
        p_star=p,
        q=q_of(params, p),
        q_bar=q_bar_of(params, p),
        psi=mark_density(params, p),
        iterations=it,
        residual=residual,
    )


def _threshold_objective(lam: float, k: int) -> float:
    tail = poisson_tail(lam, k - 1)
    return math.inf if tail == 0.0 else lam / tail


def threshold_d_k(k: int, tol: float = 1e-10) -> float:
    """Core-emergence threshold d_k = min_lam lam / P[Po(lam) >= k-1].

    Golden-section search on the bracket [1e-3, 100], where the objective
    is unimodal for every supported k (3 <= k <= 50).
    """
    if int(k) != k or k < 3:
        raise ValueError(f"k must be an integer >= 3, got {k}")
    if k > 50:
        raise ValueError("threshold search bracket only covers k <= 50")
    a, b = THRESHOLD_BRACKET
    c = b - INV_PHI * (b - a)
    e = a + INV_PHI * (b - a)
    fc, fe = _threshold_objective(c, k), _threshold_objective(e, k)
    # the objective is flat at its minimum, so a tight bracket on lambda
    # pins the minimum value far below tol
    while b - a > min(tol, 1e-8) * max(1.0, c):
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - INV_PHI * (b - a)
            fc = _threshold_objective(c, k)
        else:
            a, c, fc = c, e, fe
            e = a + INV_PHI * (b - a)
            fe = _threshold_objective(e, k)
    return min(fc, fe)
