"""Empirical laws of depth-s marked neighbourhoods and their comparison."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .canon import forest_codes, graph_codes
from .fixedpoint import CoreParams, solve_p_star
from .graph import SparseGraph
from .kcore import CoreMarking
from .parallel import ordered_map
from .trees import (
    BranchingSpec,
    Forest,
    derive_top_down_marks,
    project_two_type,
    sample_bottom_up,
    sample_two_type_star,
    tree_wp_boundary,
)

DEFAULT_BATCH = 5000


@dataclass
class NeighborhoodDistribution:
    """Class counts keyed by canonical code."""

    counts: dict[str, int]
    total: int
    depth: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.counts.values()) != self.total:
            raise ValueError("class counts do not sum to the total")

    @classmethod
    def from_codes(cls, codes, depth: int, provenance: dict | None = None) -> NeighborhoodDistribution:
        counts = Counter(codes)
        return cls(dict(counts), sum(counts.values()), depth, dict(provenance or {}))

    def frequencies(self) -> dict[str, float]:
        if self.total == 0:
            return {}
        return {c: n / self.total for c, n in self.counts.items()}

    def merge(self, other: NeighborhoodDistribution) -> NeighborhoodDistribution:
        if other.depth != self.depth:
            raise ValueError(f"cannot merge depth {self.depth} with depth {other.depth}")
        counts = Counter(self.counts)
        counts.update(other.counts)
        prov = {"merged": [self.provenance, other.provenance]}
        return NeighborhoodDistribution(dict(counts), self.total + other.total, self.depth, prov)


def merge_all(dists: list[NeighborhoodDistribution]) -> NeighborhoodDistribution:
    if not dists:
        raise ValueError("nothing to merge")
    counts = Counter()
    for d in dists:
        if d.depth != dists[0].depth:
            raise ValueError("depth mismatch")
        counts.update(d.counts)
    prov = {"merged": [d.provenance for d in dists]}
    return NeighborhoodDistribution(dict(counts), sum(d.total for d in dists), dists[0].depth, prov)


def empirical_neighborhoods(g: SparseGraph, marking: CoreMarking, s: int, provenance=None) -> NeighborhoodDistribution:
    """Tally the core-marked depth-s neighbourhood of every vertex."""
    if len(marking.membership) != g.n:
        raise ValueError("marking does not belong to this graph")
    codes = graph_codes(g, marking.membership.astype(np.int64), s)
    prov = {"source": "graph", "n": g.n, "m": g.m, "k": marking.k}
    prov.update(provenance or {})
    return NeighborhoodDistribution.from_codes(codes, s, prov)


# ------------------------------------------------------------ tree side


@dataclass(frozen=True)
class TreeLaw:
    """Tree processes that are not plain branching specs.

    kind:
      ``boundary``  GW tree with Be(p_star) boundary bits, messages passed up;
      ``bottom_up`` GW tree marked by round-``t`` up-messages;
      ``top_down``  the 2-type tree decorated with down-messages and marks.
    """

    kind: str
    d: float
    k: int
    t: int = 0
    rounds: int | None = None

    def __post_init__(self):
        if self.kind not in ("boundary", "bottom_up", "top_down"):
            raise ValueError(f"unknown tree law {self.kind!r}")

    @property
    def p_star(self) -> float:
        return solve_p_star(CoreParams(self.d, self.k)).p_star

    def sample(self, s: int, size: int, rng: np.random.Generator) -> Forest:
        if self.kind == "boundary":
            rounds = s if self.rounds is None else self.rounds
            return tree_wp_boundary(self.d, self.k, self.p_star, s, rounds, rng, size)
        if self.kind == "bottom_up":
            return sample_bottom_up(self.d, self.k, s, self.t, rng, size)
        star = BranchingSpec(self.d, self.k, self.p_star, "two_type_star")
        return derive_top_down_marks(sample_two_type_star(star, s + 1, rng, size), self.k)

    def describe(self) -> dict:
        return {"law": self.kind, "d": self.d, "k": self.k, "t": self.t, "rounds": self.rounds}


def _describe(sampler) -> dict:
    if isinstance(sampler, BranchingSpec):
        return {"law": sampler.variant, "d": sampler.d, "k": sampler.k, "p": sampler.p}
    return sampler.describe()


def _sample(sampler, s, size, rng) -> Forest:
    if isinstance(sampler, BranchingSpec):
        return sampler.sample(s, rng, size)
    return sampler.sample(s, size, rng)


def mc_tree_law(
    sampler, s: int, M: int, rng: np.random.Generator, project: bool = True, batch: int = DEFAULT_BATCH
) -> NeighborhoodDistribution:
    """Monte Carlo law of the depth-s ball of a tree process.

    ``sampler`` is a BranchingSpec or a TreeLaw. 5-type marks are reduced
    to their first bit unless ``project`` is False. Batches draw from
    child generators spawned off ``rng``, so the result does not depend on
    the thread count.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    sizes = [batch] * (M // batch) + ([M % batch] if M % batch else [])
    streams = rng.spawn(len(sizes))

    def work(job):
        size, sub = job
        forest = _sample(sampler, s, size, sub)
        if project and forest.alphabet == "triple":
            forest = project_two_type(forest)
        return Counter(forest_codes(forest, s))

    counts = Counter()
    for part in ordered_map(work, zip(sizes, streams)):
        counts.update(part)
    prov = {"source": "tree", **_describe(sampler), "M": M, "projected": project}
    return NeighborhoodDistribution(dict(counts), M, s, prov)


# ----------------------------------------------------------- comparison


@dataclass
class ComparisonReport:
    tv: float
    rows: list[tuple[str, float, float, float]]
    mc_error_bound: float
    settings: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "tv": self.tv,
                "mc_error_bound": self.mc_error_bound,
                "settings": self.settings,
                "classes": [
                    {"code": c, "freq_a": fa, "freq_b": fb, "abs_diff": diff} for c, fa, fb, diff in self.rows
                ],
            },
            sort_keys=True,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["code", "freq_a", "freq_b", "abs_diff"])
        for c, fa, fb, diff in self.rows:
            w.writerow([c, repr(fa), repr(fb), repr(diff)])
        return buf.getvalue()


def tv_distance(a: NeighborhoodDistribution, b: NeighborhoodDistribution, c: float = 1.0) -> ComparisonReport:
    """Total variation distance over the union of supports.

    The reported ``mc_error_bound`` is c * sqrt(K / min(total_a, total_b))
    with K the union support size, a conservative scale for the sampling
    error of a plug-in TV estimate.
    """
    if a.depth != b.depth:
        raise ValueError(f"depth mismatch: {a.depth} vs {b.depth}")
    fa, fb = a.frequencies(), b.frequencies()
    rows = []
    for code in set(fa) | set(fb):
        x, y = fa.get(code, 0.0), fb.get(code, 0.0)
        rows.append((code, x, y, abs(x - y)))
    rows.sort(key=lambda r: (-r[3], r[0]))
    tv = 0.5 * math.fsum(r[3] for r in rows)
    smaller = min(a.total, b.total)
    bound = min(1.0, c * math.sqrt(len(rows) / smaller)) if smaller else 1.0
    settings = {"depth": a.depth, "total_a": a.total, "total_b": b.total, "support": len(rows)}
    return ComparisonReport(min(tv, 1.0), rows, bound, settings)


def tv_permutation_test(
    a: NeighborhoodDistribution, b: NeighborhoodDistribution, rng: np.random.Generator, n_perm: int = 200
) -> tuple[float, float, float]:
    """Two-sample permutation test with TV as the statistic.

    Pooled samples are re-split at random (a multivariate hypergeometric
    draw on the pooled class counts). Returns (observed TV, mean TV under
    the null, p-value). The null mean is the noise floor of the plug-in TV
    at these sample sizes.
    """
    codes = sorted(set(a.counts) | set(b.counts))
    ca = np.array([a.counts.get(c, 0) for c in codes], dtype=np.int64)
    cb = np.array([b.counts.get(c, 0) for c in codes], dtype=np.int64)
    pooled = ca + cb

    def tv(x, y):
        return 0.5 * float(np.abs(x / x.sum() - y / y.sum()).sum())

    observed = tv(ca, cb)
    null = np.empty(n_perm)
    for i in range(n_perm):
        x = rng.multivariate_hypergeometric(pooled, int(ca.sum()))
        null[i] = tv(x, pooled - x)
    pval = (1 + int(np.count_nonzero(null >= observed - 1e-15))) / (n_perm + 1)
    return observed, float(null.mean()), pval


def chi_square_homogeneity(
    a: NeighborhoodDistribution, b: NeighborhoodDistribution, min_expected: float = 10.0
) -> tuple[float, int, float]:
    """Chi-square test that two samples share one law.

    Classes whose pooled expected count falls below ``min_expected`` in
    either sample are lumped into one bin. Returns (statistic, dof, p-value).
    """
    codes = sorted(set(a.counts) | set(b.counts))
    table = np.array([[a.counts.get(c, 0) for c in codes], [b.counts.get(c, 0) for c in codes]], dtype=float)
    col = table.sum(axis=0)
    expected_small = np.minimum(col * a.total, col * b.total) / (a.total + b.total)
    big = expected_small >= min_expected
    cols = [table[:, big]]
    if np.any(~big):
        cols.append(table[:, ~big].sum(axis=1, keepdims=True))
    table = np.hstack(cols)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 0.0, 0, 1.0
    stat, pval, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(stat), int(dof), float(pval)
