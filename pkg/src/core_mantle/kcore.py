"""k-core extraction by peeling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SparseGraph


@dataclass(frozen=True)
class CoreMarking:
    membership: np.ndarray  # bool per vertex, True = in the k-core
    k: int

    @property
    def core_size(self) -> int:
        return int(self.membership.sum())

    def fraction(self) -> float:
        n = len(self.membership)
        return self.core_size / n if n else 0.0


def peel_core(g: SparseGraph, k: int, rng: np.random.Generator | None = None) -> CoreMarking:
    """Repeatedly delete vertices of current degree < k; O(n + m).

    Deletion candidates sit in a single bucket (current degree < k). A
    vertex enters it exactly once, when its degree first drops to k - 1.
    With ``rng`` the bucket is drained in random order instead of LIFO;
    the resulting set is the same because the k-core is unique.

    k = 1, 2 are accepted but lie outside the k >= 3 theory.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    deg = g.degrees.astype(np.int64).tolist()
    indptr = g.indptr.tolist()
    dst = g.dst.tolist()
    removed = [False] * g.n
    bucket = [v for v in range(g.n) if deg[v] < k]
    queued = [d < k for d in deg]
    while bucket:
        if rng is None:
            v = bucket.pop()
        else:
            i = int(rng.integers(len(bucket)))
            bucket[i], bucket[-1] = bucket[-1], bucket[i]
            v = bucket.pop()
        removed[v] = True
        for e in range(indptr[v], indptr[v + 1]):
            w = dst[e]
            if removed[w]:
                continue
            deg[w] -= 1
            if not queued[w] and deg[w] < k:
                queued[w] = True
                bucket.append(w)
    membership = ~np.asarray(removed, dtype=bool)
    return CoreMarking(membership, k)


def check_core(g: SparseGraph, marking: CoreMarking) -> None:
    """Raise AssertionError unless every core vertex keeps >= k core neighbours."""
    inside = marking.membership
    if not inside.any():
        return
    in_deg = np.bincount(g.src[inside[g.dst]], minlength=g.n)
    bad = np.flatnonzero(inside & (in_deg < marking.k))
    if len(bad):
        raise AssertionError(f"{len(bad)} core vertices have fewer than k={marking.k} core neighbours")
