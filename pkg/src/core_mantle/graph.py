"""Sparse undirected graphs with directed-edge indexing.

Adjacency is stored in CSR form. Directed edge ``e`` runs from ``src[e]``
to ``dst[e]``; out-edges of a vertex occupy a contiguous slice and
``rev[e]`` is the index of the opposite direction, which is what the
message-passing kernels need.
"""
from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np


class EdgeListError(ValueError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class SparseGraph:
    """Immutable simple undirected graph on vertices ``0..n-1``."""

    def __init__(self, n: int, edges=None):
        n = int(n)
        if n < 0:
            raise ValueError("n must be >= 0")
        edges = np.zeros((0, 2), dtype=np.int64) if edges is None else np.asarray(edges, dtype=np.int64)
        edges = edges.reshape(-1, 2)
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        key = lo * max(n, 1) + hi
        order = np.argsort(key, kind="stable")
        key = key[order]
        if len(key) > 1 and np.any(key[1:] == key[:-1]):
            raise ValueError("multi-edges are not allowed")
        self.n = n
        self._edges = np.stack([lo[order], hi[order]], axis=1)

        src = np.concatenate([self._edges[:, 0], self._edges[:, 1]])
        dst = np.concatenate([self._edges[:, 1], self._edges[:, 0]])
        dkey = src * max(n, 1) + dst
        perm = np.argsort(dkey, kind="stable")
        self.src = src[perm]
        self.dst = dst[perm]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.src, minlength=n), out=self.indptr[1:])
        sorted_key = dkey[perm]
        self.rev = np.searchsorted(sorted_key, self.dst * max(n, 1) + self.src)
        for arr in (self._edges, self.src, self.dst, self.indptr, self.rev):
            arr.setflags(write=False)

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edges(self) -> np.ndarray:
        """(m, 2) array of edges ``u < v`` in lexicographic order."""
        return self._edges

    def neighbors(self, v: int) -> np.ndarray:
        return self.dst[self.indptr[v]:self.indptr[v + 1]]

    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(v).tolist() for v in range(self.n)]

    def edge_index(self, v: int, w: int) -> int:
        """Index of the directed edge v -> w."""
        lo, hi = self.indptr[v], self.indptr[v + 1]
        i = lo + int(np.searchsorted(self.dst[lo:hi], w))
        if i >= hi or self.dst[i] != w:
            raise KeyError(f"({v}, {w}) is not an edge")
        return int(i)

    def __eq__(self, other):
        return isinstance(other, SparseGraph) and self.n == other.n and np.array_equal(self._edges, other._edges)

    def __repr__(self):
        return f"SparseGraph(n={self.n}, m={self.m})"


def _pair_from_index(L: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert the row-major enumeration of pairs i < j."""

    def row_start(i):
        return i * (2 * n - i - 1) // 2

    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * L)) / 2.0).astype(np.int64)
    i = np.clip(i, 0, n - 2)
    # float rounding can leave i off by one either way
    i -= row_start(i) > L
    i += row_start(i + 1) <= L
    return i, L - row_start(i) + i + 1


def sample_gnp(n: int, edge_prob: float, rng: np.random.Generator) -> SparseGraph:
    """G(n, p) by geometric skipping over the sequence of vertex pairs."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge_prob must lie in [0, 1], got {edge_prob}")
    n = int(n)
    total = n * (n - 1) // 2
    if total == 0 or edge_prob == 0.0:
        return SparseGraph(n)
    if edge_prob == 1.0:
        L = np.arange(total, dtype=np.int64)
    else:
        chunks = []
        pos = -1
        expect = total * edge_prob
        chunk = int(expect + 6 * math.sqrt(expect) + 64)
        while True:
            skips = rng.geometric(edge_prob, size=chunk)
            idx = pos + np.cumsum(skips)
            keep = idx[idx < total]
            chunks.append(keep)
            if len(keep) < len(idx):
                break
            pos = int(idx[-1])
            chunk = max(64, chunk // 4)
        L = np.concatenate(chunks)
    i, j = _pair_from_index(L, n)
    return SparseGraph(n, np.stack([i, j], axis=1))


@dataclass
class RootedMarkedNeighborhood:
    """Subgraph induced on the vertices within distance ``depth`` of ``root``."""

    root: int
    depth: int
    vertices: list[int]
    dist: dict[int, int]
    edges: list[tuple[int, int]]
    marks: dict[int, int] = field(default_factory=dict)

    def is_tree(self) -> bool:
        return len(self.edges) == len(self.vertices) - 1


def extract_neighborhood(g: SparseGraph, v: int, s: int, marks=None) -> RootedMarkedNeighborhood:
    if not 0 <= v < g.n:
        raise IndexError(f"vertex {v} out of range for n={g.n}")
    if s < 0:
        raise ValueError("depth must be >= 0")
    dist = {v: 0}
    order = [v]
    queue = deque([v])
    while queue:
        u = queue.popleft()
        if dist[u] == s:
            continue
        for w in g.neighbors(u).tolist():
            if w not in dist:
                dist[w] = dist[u] + 1
                order.append(w)
                queue.append(w)
    edges = []
    for u in order:
        for w in g.neighbors(u).tolist():
            if u < w and w in dist:
                edges.append((u, w))
    if marks is None:
        mk = {u: 0 for u in order}
    else:
        mk = {u: int(marks[u]) for u in order}
    return RootedMarkedNeighborhood(v, s, order, dist, edges, mk)


def write_edge_list(g: SparseGraph, destination) -> None:
    lines = [f"n={g.n}"] + [f"{u} {v}" for u, v in g.edges().tolist()]
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w") as fh:
            fh.write(text)


def read_edge_list(source) -> SparseGraph:
    """Parse the ``n=<n>`` header plus ``u v`` lines written by write_edge_list."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source) as fh:
            text = fh.read()
    else:
        raise FileNotFoundError(source)
    lines = text.splitlines()
    if not lines or not lines[0].startswith("n="):
        raise EdgeListError(1, "expected header 'n=<n>'")
    try:
        n = int(lines[0][2:])
    except ValueError:
        raise EdgeListError(1, f"bad vertex count {lines[0]!r}") from None
    if n < 0:
        raise EdgeListError(1, "negative vertex count")
    seen = set()
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(lineno, f"expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListError(lineno, f"non-integer vertex id in {line!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise EdgeListError(lineno, f"vertex id out of range [0, {n})")
        if u >= v:
            raise EdgeListError(lineno, f"expected u < v, got {u} {v}")
        if (u, v) in seen:
            raise EdgeListError(lineno, f"duplicate edge {u} {v}")
        seen.add((u, v))
        edges.append((u, v))
    return SparseGraph(n, edges)
