"""Canonical codes for rooted marked trees and tree-like neighbourhoods.

A code is the text ``(mark child child ...)`` with the child codes sorted
as strings, so two rooted marked trees get the same code exactly when they
are isomorphic. Neighbourhoods that contain a cycle all share the reserved
code ``CYCLIC``.

Two routes compute the same codes: a direct recursive one (the reference)
and a level-wise interning one that works on whole batches at once.
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np
import scipy.sparse as sp

from .graph import RootedMarkedNeighborhood, SparseGraph
from .trees import Forest

CYCLIC = "CYCLIC"


def _label(mark: int, alphabet: str) -> str:
    return format(int(mark), "03b") if alphabet == "triple" else str(int(mark))


def _join(label: str, kids: list[str]) -> str:
    kids = sorted(kids)
    return "(" + " ".join([label, *kids]) + ")"


# ------------------------------------------------------- reference route


def canonical_tree_code(tree: Forest, s: int | None = None) -> str:
    """Code of a single rooted marked tree cut at depth ``s``."""
    if tree.n_trees != 1:
        raise ValueError(f"expected a single tree, got {tree.n_trees}")
    depth = tree.depth
    keep = np.ones(tree.n_nodes, dtype=bool) if s is None else depth <= s
    kids: dict[int, list[str]] = defaultdict(list)
    code = ""
    # children always come after their parent, so walk backwards
    for v in range(tree.n_nodes - 1, -1, -1):
        if not keep[v]:
            continue
        code = _join(_label(tree.marks[v], tree.alphabet), kids.pop(v, []))
        if tree.parent[v] >= 0:
            kids[int(tree.parent[v])].append(code)
    return code


def canonical_neighborhood_code(nb: RootedMarkedNeighborhood, alphabet: str = "binary") -> str:
    if not nb.is_tree():
        return CYCLIC
    adj: dict[int, list[int]] = defaultdict(list)
    for u, w in nb.edges:
        adj[u].append(w)
        adj[w].append(u)

    def code(v, parent):
        return _join(_label(nb.marks[v], alphabet), [code(w, v) for w in adj[v] if w != parent])

    return code(nb.root, -1)


# ---------------------------------------------------------- batch route


def _unique_rows(rows: np.ndarray):
    # np.unique(axis=0) sorts rows as opaque records and is far slower
    order = np.lexsort(rows.T[::-1])
    ordered = rows[order]
    fresh = np.ones(len(rows), dtype=bool)
    fresh[1:] = np.any(ordered[1:] != ordered[:-1], axis=1)
    inverse = np.empty(len(rows), dtype=np.int64)
    inverse[order] = np.cumsum(fresh) - 1
    return ordered[fresh], inverse


def _intern(marks: np.ndarray, children: np.ndarray, child_strings: list[str], alphabet: str):
    """Assign class ids to rows ``(mark, sorted child ids padded by -1)``.

    Returns per-row ids and the code string of every id.
    """
    rows = np.column_stack([marks, np.sort(children, axis=1)]) if children.shape[1] else marks[:, None]
    if len(rows) == 0:
        return np.zeros(0, dtype=np.int64), []
    uniq, inverse = _unique_rows(rows)
    strings = [
        _join(_label(row[0], alphabet), [child_strings[c] for c in row[1:] if c >= 0])
        for row in uniq.tolist()
    ]
    return inverse.reshape(-1).astype(np.int64), strings


def forest_codes(forest: Forest, s: int | None = None) -> list[str]:
    """Codes of every tree in a forest, cut at depth ``s``."""
    f = forest if s is None else forest.truncate(s)
    levels = f.level_slices()
    ids = np.zeros(0, dtype=np.int64)
    strings: list[str] = []
    for L in range(len(levels) - 1, -1, -1):
        lo, hi = levels[L]
        n = hi - lo
        if L + 1 < len(levels):
            clo, chi = levels[L + 1]
            lp = f.parent[clo:chi] - lo
            counts = np.bincount(lp, minlength=n)
            width = int(counts.max()) if len(counts) else 0
            starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
            pos = np.arange(chi - clo) - starts[lp]
            children = np.full((n, width), -1, dtype=np.int64)
            children[lp, pos] = ids
        else:
            children = np.zeros((n, 0), dtype=np.int64)
        ids, strings = _intern(f.marks[lo:hi], children, strings, f.alphabet)
    return [strings[i] for i in ids]


def cyclic_vertices(g: SparseGraph, s: int, chunk: int = 20000) -> np.ndarray:
    """Boolean mask of vertices whose depth-s ball contains a cycle.

    The ball is connected, so it is a tree iff it has one edge fewer than
    vertices.
    """
    out = np.zeros(g.n, dtype=bool)
    if s == 0 or g.m == 0:
        return out
    A = sp.csr_matrix((np.ones(2 * g.m, dtype=np.int32), (g.src, g.dst)), shape=(g.n, g.n))
    for lo in range(0, g.n, chunk):
        hi = min(g.n, lo + chunk)
        ball = sp.csr_matrix(
            (np.ones(hi - lo, dtype=np.int32), (np.arange(hi - lo), np.arange(lo, hi))), shape=(hi - lo, g.n)
        )
        for _ in range(s):
            ball = ball + ball @ A
            ball.data[:] = 1
        size = np.asarray(ball.sum(axis=1)).ravel()
        edges = np.asarray((ball @ A).multiply(ball).sum(axis=1)).ravel() // 2
        out[lo:hi] = edges != size - 1
    return out


def graph_codes(g: SparseGraph, marks: np.ndarray, s: int) -> list[str]:
    """Code of the depth-s neighbourhood of every vertex.

    Directed edge v -> w gets the class of the subtree hanging off w away
    from v, built up one depth at a time; the root combines all its
    out-edges. Cyclic balls are then overwritten with CYCLIC.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    marks = np.asarray(marks, dtype=np.int64)
    if s == 0:
        return [f"({int(m)})" for m in marks]
    deg = g.degrees
    width = int(deg.max()) if g.n else 0
    J = np.arange(width)

    def gather(owners, exclude):
        # classes of the out-edges of each owner vertex, minus one edge
        idx = g.indptr[owners][:, None] + J
        valid = J < deg[owners][:, None]
        idx = np.where(valid, idx, 0)
        if exclude is not None:
            valid &= idx != exclude[:, None]
        return np.where(valid, cls[idx], -1)

    cls, strings = _intern(marks[g.dst], np.zeros((2 * g.m, 0), dtype=np.int64), [], "binary")
    for _ in range(1, s):
        cls, strings = _intern(marks[g.dst], gather(g.dst, g.rev), strings, "binary")
    root_ids, root_strings = _intern(marks, gather(np.arange(g.n), None), strings, "binary")
    codes = [root_strings[i] for i in root_ids]
    for v in np.flatnonzero(cyclic_vertices(g, s)).tolist():
        codes[v] = CYCLIC
    return codes
