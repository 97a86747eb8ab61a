"""Random marked trees: Galton-Watson, Warning Propagation on trees, and
the 2-type / 5-type branching processes describing core membership.

Trees are handled in batches. A :class:`Forest` stores many rooted trees as
flat arrays ordered level by level: the roots come first, and the children
of every node are contiguous and appear in the order of their parents.
Marks are small integers. Binary marks are 0/1. A 5-type mark (a, b, c) =
(mark, up-message, down-message) is packed as ``a << 2 | b << 1 | c``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .fixedpoint import CoreParams, density_trajectory, q_bar_of, q_of
from .probdist import truncated_poisson

TYPE_NAMES = ("000", "001", "010", "110", "111")
TYPE_CODES = tuple(int(name, 2) for name in TYPE_NAMES)  # 0, 1, 2, 6, 7
T000, T001, T010, T110, T111 = TYPE_CODES
LEGAL_TRIPLES = frozenset(TYPE_CODES)


class InsufficientDepthError(ValueError):
    pass


@dataclass
class Forest:
    """A batch of rooted marked trees in level order.

    ``max_depth`` is the truncation depth: nodes at that depth may have
    children that were never sampled.
    """

    parent: np.ndarray
    depth: np.ndarray
    marks: np.ndarray
    max_depth: int
    alphabet: str = "binary"
    _tree: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=np.int64)
        self.depth = np.asarray(self.depth, dtype=np.int64)
        self.marks = np.asarray(self.marks, dtype=np.int64)
        if self.alphabet not in ("binary", "triple"):
            raise ValueError(f"unknown alphabet {self.alphabet!r}")

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def n_trees(self) -> int:
        return int(np.count_nonzero(self.parent < 0))

    @property
    def tree_of(self) -> np.ndarray:
        if self._tree is None:
            tree = np.empty(self.n_nodes, dtype=np.int64)
            r = self.n_trees
            tree[:r] = np.arange(r)
            # parents precede children, one level at a time
            for lo, hi in self.level_slices()[1:]:
                tree[lo:hi] = tree[self.parent[lo:hi]]
            self._tree = tree
        return self._tree

    def level_slices(self) -> list[tuple[int, int]]:
        bounds = np.searchsorted(self.depth, np.arange(self.depth.max() + 2 if self.n_nodes else 1))
        return [(int(bounds[i]), int(bounds[i + 1])) for i in range(len(bounds) - 1)]

    def child_counts(self) -> np.ndarray:
        r = self.n_trees
        return np.bincount(self.parent[r:], minlength=self.n_nodes)

    def child_sums(self, values: np.ndarray) -> np.ndarray:
        r = self.n_trees
        return np.bincount(self.parent[r:], weights=values[r:], minlength=self.n_nodes).astype(np.int64)

    def truncate(self, s: int) -> Forest:
        """The depth-s ball around every root."""
        if s >= self.max_depth:
            return self
        cut = int(np.searchsorted(self.depth, s, side="right"))
        return Forest(self.parent[:cut], self.depth[:cut], self.marks[:cut], s, self.alphabet)

    def with_marks(self, marks: np.ndarray, alphabet: str | None = None) -> Forest:
        return Forest(self.parent, self.depth, marks, self.max_depth, alphabet or self.alphabet, self._tree)

    def tree(self, i: int) -> Forest:
        """Extract tree ``i`` as a single-tree forest."""
        nodes = np.flatnonzero(self.tree_of == i)
        remap = np.full(self.n_nodes, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        par = self.parent[nodes]
        par = np.where(par >= 0, remap[np.maximum(par, 0)], -1)
        return Forest(par, self.depth[nodes], self.marks[nodes], self.max_depth, self.alphabet)

    def mark_label(self, m: int) -> str:
        return format(int(m), "03b") if self.alphabet == "triple" else str(int(m))

    def validate(self) -> None:
        r = self.n_trees
        if np.any(self.parent[:r] >= 0) or np.any(self.parent[r:] < 0):
            raise ValueError("roots must come first")
        if np.any(np.diff(self.parent[r:]) < 0):
            raise ValueError("children must be grouped in parent order")
        if np.any(self.depth[r:] != self.depth[self.parent[r:]] + 1):
            raise ValueError("depth inconsistent with parent links")
        if self.n_nodes and self.depth.max() > self.max_depth:
            raise ValueError("node deeper than the truncation depth")


def concat_forests(forests: list[Forest]) -> Forest:
    """Stack several forests into one, keeping level order."""
    if not forests:
        raise ValueError("nothing to concatenate")
    alphabet = forests[0].alphabet
    max_depth = max(f.max_depth for f in forests)
    depth = np.concatenate([f.depth for f in forests])
    order = np.argsort(depth, kind="stable")
    offsets = np.cumsum([0] + [f.n_nodes for f in forests[:-1]])
    gpar = np.concatenate([np.where(f.parent >= 0, f.parent + off, -1) for f, off in zip(forests, offsets)])
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    parent = gpar[order]
    parent = np.where(parent >= 0, inv[np.maximum(parent, 0)], -1)
    marks = np.concatenate([f.marks for f in forests])[order]
    return Forest(parent, depth[order], marks, max_depth, alphabet)


def _grow(roots: np.ndarray, depth: int, offspring, alphabet: str) -> Forest:
    """Level-by-level construction.

    ``offspring(marks, level)`` returns ``(counts, child_marks)`` where
    ``counts[i, j]`` is the number of children of mark ``child_marks[j]``
    for the i-th node of the current level.
    """
    roots = np.asarray(roots, dtype=np.int64)
    parents = [np.full(len(roots), -1, dtype=np.int64)]
    marks = [roots]
    depths = [np.zeros(len(roots), dtype=np.int64)]
    lo = 0
    cur = roots
    for level in range(depth):
        if len(cur) == 0:
            break
        counts, child_marks = offspring(cur, level)
        counts = np.asarray(counts, dtype=np.int64).reshape(len(cur), len(child_marks))
        flat = counts.ravel()
        idx = np.arange(lo, lo + len(cur))
        par = np.repeat(np.repeat(idx, len(child_marks)), flat)
        mk = np.repeat(np.tile(np.asarray(child_marks, dtype=np.int64), len(cur)), flat)
        lo += len(cur)
        parents.append(par)
        marks.append(mk)
        depths.append(np.full(len(mk), level + 1, dtype=np.int64))
        cur = mk
    return Forest(np.concatenate(parents), np.concatenate(depths), np.concatenate(marks), depth, alphabet)


# ---------------------------------------------------------------- plain GW


def sample_gw(d: float, depth: int, rng: np.random.Generator, size: int = 1) -> Forest:
    """Po(d) Galton-Watson trees cut at ``depth``; all marks 0."""
    if depth < 0:
        raise ValueError("depth must be >= 0")

    def offspring(cur, level):
        return rng.poisson(d, size=len(cur))[:, None], (0,)

    return _grow(np.zeros(size, dtype=np.int64), depth, offspring, "binary")


@dataclass(frozen=True)
class TreeMessages:
    """Warning Propagation on a forest after ``t`` rounds.

    Entries are meaningful only where ``valid`` holds, i.e. at nodes whose
    depth plus ``t`` does not exceed the sampled depth.
    """

    t: int
    up: np.ndarray
    down: np.ndarray
    marks: np.ndarray
    valid: np.ndarray


def tree_wp(tree: Forest, k: int, t: int) -> TreeMessages:
    """Run ``t`` synchronous Warning Propagation rounds on a forest.

    Up-messages start at 1 and become 1{#children sending 1 >= k-1}. The
    root receives no down-message; every other node receives 1 at round 0
    and afterwards 1{down(parent) + #siblings sending 1 >= k-1}. Marks use
    the same-round messages: 1{down + #children sending 1 >= k}.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    r = tree.n_trees
    nonroot = tree.parent >= 0
    par = np.maximum(tree.parent, 0)
    up = np.ones(tree.n_nodes, dtype=np.int64)
    down = nonroot.astype(np.int64)
    sums = tree.child_sums(up)
    for _ in range(t):
        new_up = (sums >= k - 1).astype(np.int64)
        new_down = np.where(nonroot, (down[par] + sums[par] - up >= k - 1), 0).astype(np.int64)
        up, down = new_up, new_down
        sums = tree.child_sums(up)
    marks = (down + sums >= k).astype(np.int64)
    valid = tree.depth + t <= tree.max_depth
    del r
    return TreeMessages(t, up, down, marks, valid)


def bottom_up_forest(tree: Forest, k: int, t: int, s: int, which: str = "up") -> Forest:
    """Depth-s ball of ``tree`` marked by round-t messages (``which="up"``)
    or round-t marks (``which="mark"``)."""
    if s + t > tree.max_depth:
        raise InsufficientDepthError(
            f"round-{t} values at depth {s} need trees sampled to depth {s + t}, got {tree.max_depth}"
        )
    res = tree_wp(tree, k, t)
    vals = res.up if which == "up" else res.marks
    return tree.with_marks(vals, "binary").truncate(s)


def sample_bottom_up(d: float, k: int, s: int, t: int, rng: np.random.Generator, size: int = 1) -> Forest:
    """Depth-s ball of a Po(d) tree marked by round-t up-messages.

    Equal in law to ``bottom_up_forest(sample_gw(d, s + t), k, t, s)`` but
    only the first s levels are sampled. Each depth-s node roots an
    independent Po(d) tree, so its message sequence over rounds is a
    nonincreasing 0/1 sequence with P[message at round r = 1] = p^(r); it is
    realised as 1{U < p^(r)} from a single uniform U.
    """
    if s < 0 or t < 0:
        raise ValueError("s and t must be >= 0")
    traj = np.asarray(density_trajectory(CoreParams(d, k), t))
    base = sample_gw(d, s, rng, size)
    u = rng.random(base.n_nodes)
    boundary = base.depth == s
    # up[r] for r = 0..t, rolled forward one round at a time
    up = np.where(boundary, u < traj[0], 1).astype(np.int64)
    for rnd in range(t):
        sums = base.child_sums(up)
        up = np.where(boundary, u < traj[rnd + 1], sums >= k - 1).astype(np.int64)
    return base.with_marks(up, "binary")


def tree_wp_boundary(
    d: float, k: int, p_star: float, s: int, rounds: int, rng: np.random.Generator, size: int = 1
) -> Forest:
    """Depth-s Po(d) trees with Be(p_star) boundary messages passed upward.

    Every node carries an independent Be(p_star) bit at round 0. Depth-s
    nodes keep their bit for ever; shallower nodes recompute
    1{#children sending 1 >= k-1} each round, so the depth-s ball is stable
    from round s on. Returned marks are the messages after ``rounds`` rounds.
    """
    if s < 0 or rounds < 0:
        raise ValueError("s and rounds must be >= 0")
    base = sample_gw(d, s, rng, size)
    up = (rng.random(base.n_nodes) < p_star).astype(np.int64)
    frozen = base.depth == s
    for _ in range(rounds):
        up = np.where(frozen, up, base.child_sums(up) >= k - 1).astype(np.int64)
    return base.with_marks(up, "binary")


# ------------------------------------------------------ branching processes


@dataclass(frozen=True)
class BranchingSpec:
    """Parameters of the 5-type process (also used for the plain GW tree
    and the 2-type top-down tree, which ignore q and q_bar)."""

    d: float
    k: int
    p: float
    variant: str = "five_type"

    def __post_init__(self):
        if self.variant not in ("plain_gw", "two_type_star", "five_type"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    @property
    def q(self) -> float:
        return q_of(CoreParams(self.d, self.k), self.p)

    @property
    def q_bar(self) -> float:
        return q_bar_of(CoreParams(self.d, self.k), self.p)

    @property
    def root_law(self) -> dict[str, float]:
        q = self.q
        return {"000": 1.0 - self.p, "010": self.p * q, "110": self.p * (1.0 - q)}

    def sample(self, depth: int, rng: np.random.Generator, size: int = 1) -> Forest:
        if self.variant == "plain_gw":
            return sample_gw(self.d, depth, rng, size)
        if self.variant == "two_type_star":
            return sample_two_type_star(self, depth, rng, size)
        return sample_five_type(self, depth, rng, size)


def sample_two_type_star(spec: BranchingSpec, depth: int, rng: np.random.Generator, size: int = 1) -> Forest:
    """Top-down 2-type tree whose type is the up-message.

    Root ~ Be(p). A type-0 node has Po(d(1-p)) type-0 and Po_{<k-1}(dp)
    type-1 children; a type-1 node has Po(d(1-p)) type-0 and
    Po_{>=k-1}(dp) type-1 children.
    """
    d, k, p = spec.d, spec.k, spec.p
    lo_rate, hi_rate = d * (1.0 - p), d * p

    def offspring(cur, level):
        n = len(cur)
        counts = np.empty((n, 2), dtype=np.int64)
        counts[:, 0] = rng.poisson(lo_rate, size=n)
        ones = cur == 1
        counts[~ones, 1] = truncated_poisson(hi_rate, "less_than", k - 1, int((~ones).sum()), rng)
        counts[ones, 1] = truncated_poisson(hi_rate, "at_least", k - 1, int(ones.sum()), rng)
        return counts, (0, 1)

    roots = (rng.random(size) < p).astype(np.int64)
    return _grow(roots, depth, offspring, "binary")


def sample_offspring(spec: BranchingSpec, node_type: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Offspring count vectors (size, 5) over TYPE_CODES for one parent type.

    Each generating function of the 5-type process becomes independent
    draws: a Po(d(1-p)) count of up-0 children plus a count of up-1
    children that is either fixed or truncated Poisson, the latter split
    into 010 / 110 by Bernoulli(q) thinning when the children's down-message
    is 0.
    """
    d, k, p = spec.d, spec.k, spec.p
    lo_rate, hi_rate = d * (1.0 - p), d * p
    out = np.zeros((size, 5), dtype=np.int64)
    if size == 0:
        return out
    zeros = rng.poisson(lo_rate, size=size)

    def split(h):
        n010 = rng.binomial(h, spec.q)
        out[:, 2] += n010
        out[:, 3] += h - n010

    if node_type == T000:
        out[:, 0] = zeros
        split(truncated_poisson(hi_rate, "at_most", k - 2, size, rng))
    elif node_type == T001:
        first = rng.random(size) < spec.q_bar
        out[first, 1] = zeros[first]
        out[~first, 0] = zeros[~first]
        h = np.full(size, k - 2, dtype=np.int64)
        n2 = int((~first).sum())
        if k == 3:
            h[~first] = 0  # Po_{<=0} is the point mass at 0
        elif n2:
            h[~first] = truncated_poisson(hi_rate, "at_most", k - 3, n2, rng)
        split(h)
    elif node_type == T010:
        out[:, 1] = zeros
        split(np.full(size, k - 1, dtype=np.int64))
    elif node_type == T110:
        out[:, 1] = zeros
        out[:, 4] = truncated_poisson(hi_rate, "at_least", k, size, rng)
    elif node_type == T111:
        out[:, 1] = zeros
        out[:, 4] = truncated_poisson(hi_rate, "at_least", k - 1, size, rng)
    else:
        raise ValueError(f"illegal 5-type mark {node_type}")
    return out


def sample_five_type(spec: BranchingSpec, depth: int, rng: np.random.Generator, size: int = 1) -> Forest:
    """The 5-type branching process with root law (1-p, pq, p(1-q)) on
    (000, 010, 110)."""
    q = spec.q

    def offspring(cur, level):
        counts = np.zeros((len(cur), 5), dtype=np.int64)
        for code in TYPE_CODES:
            sel = np.flatnonzero(cur == code)
            if len(sel):
                counts[sel] = sample_offspring(spec, code, len(sel), rng)
        return counts, TYPE_CODES

    u = rng.random(size)
    p = spec.p
    roots = np.where(u < 1.0 - p, T000, np.where(u < 1.0 - p + p * q, T010, T110)).astype(np.int64)
    return _grow(roots, depth, offspring, "triple")


def derive_top_down_marks(tree: Forest, k: int) -> Forest:
    """Decorate an up-marked tree with down-messages and marks.

    The root receives down-message 0; a child v of u receives
    1{down(u) + #other children of u sending 1 >= k-1}; the mark of v is
    1{down(v) + #children of v sending 1 >= k}. Marks need complete
    children, so the result is cut one level above the input depth.
    """
    if tree.alphabet != "binary":
        raise ValueError("expected up-message (binary) marks")
    if tree.max_depth < 1:
        raise InsufficientDepthError("need at least one sampled level below the root")
    up = tree.marks
    sums = tree.child_sums(up)
    down = np.zeros(tree.n_nodes, dtype=np.int64)
    for lo, hi in tree.level_slices()[1:]:
        par = tree.parent[lo:hi]
        down[lo:hi] = (down[par] + sums[par] - up[lo:hi]) >= k - 1
    mark = (down + sums >= k).astype(np.int64)
    triple = (mark << 2) | (up << 1) | down
    return tree.with_marks(triple, "triple").truncate(tree.max_depth - 1)


def project_two_type(tree: Forest) -> Forest:
    """Keep only the first bit (core mark) of every 5-type mark."""
    if tree.alphabet != "triple":
        raise ValueError("expected 5-type marks")
    return tree.with_marks(tree.marks >> 2, "binary")


def five_type_violations(tree: Forest, k: int) -> dict[str, int]:
    """Count violations of the structural rules a 5-type tree must obey.

    Rules involving children are checked only above the truncation depth.
    """
    m = tree.marks
    a, b, c = m >> 2, (m >> 1) & 1, m & 1
    interior = tree.depth < tree.max_depth
    nonroot = tree.parent >= 0
    par = np.maximum(tree.parent, 0)
    up_kids = tree.child_sums(b)
    t111_kids = tree.child_sums((m == T111).astype(np.int64))
    legal = np.isin(m, TYPE_CODES)
    return {
        "alphabet": int((~legal).sum()),
        "root_down": int(np.count_nonzero(c[~nonroot])),
        "mark_rule": int(np.count_nonzero(interior & (a != (c + up_kids >= k)))),
        "up_rule": int(np.count_nonzero(interior & (b != (up_kids >= k - 1)))),
        "down_rule": int(np.count_nonzero(nonroot & (c != (c[par] + up_kids[par] - b >= k - 1)))),
        "exact_010": int(np.count_nonzero(interior & (m == T010) & (up_kids != k - 1))),
        "min_110": int(np.count_nonzero(interior & (m == T110) & (t111_kids < k))),
        "min_111": int(np.count_nonzero(interior & (m == T111) & (t111_kids < k - 1))),
    }


# ------------------------------------------------------------ text form

_TOKEN = re.compile(r"\(|\)|[01]+")


def tree_from_nested(nested, alphabet: str = "binary", max_depth: int | None = None) -> Forest:
    """Build a single-tree forest from ``(mark, [child, ...])`` tuples."""
    levels = [[(nested, -1)]]
    while True:
        nxt = []
        base = sum(len(lv) for lv in levels[:-1])
        for i, (node, _) in enumerate(levels[-1]):
            for child in node[1]:
                nxt.append((child, base + i))
        if not nxt:
            break
        levels.append(nxt)
    parent, depth, marks = [], [], []
    for dep, lv in enumerate(levels):
        for node, par in lv:
            parent.append(par)
            depth.append(dep)
            mk = node[0]
            marks.append(int(mk, 2) if isinstance(mk, str) else int(mk))
    if max_depth is None:
        max_depth = len(levels) - 1
    return Forest(np.array(parent), np.array(depth), np.array(marks), max_depth, alphabet)


def parse_tree(text: str, max_depth: int | None = None) -> Forest:
    """Inverse of the ``(mark child child ...)`` text form."""
    tokens = _TOKEN.findall(text)
    if "".join(tokens) != re.sub(r"\s+", "", text):
        raise ValueError(f"unexpected characters in tree text {text!r}")
    pos = 0

    def node():
        nonlocal pos
        if tokens[pos] != "(":
            raise ValueError(f"expected '(' at token {pos}")
        mark = tokens[pos + 1]
        pos += 2
        kids = []
        while tokens[pos] != ")":
            kids.append(node())
        pos += 1
        return (mark, kids)

    try:
        nested = node()
    except IndexError:
        raise ValueError(f"unbalanced tree text {text!r}") from None
    if pos != len(tokens):
        raise ValueError("trailing tokens after tree")
    alphabet = "triple" if len(nested[0]) == 3 else "binary"
    return tree_from_nested(nested, alphabet, max_depth)
