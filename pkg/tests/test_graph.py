import io
import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from core_mantle.graph import (
    EdgeListError,
    SparseGraph,
    _pair_from_index,
    extract_neighborhood,
    read_edge_list,
    sample_gnp,
    write_edge_list,
)


def test_structure_and_reverse_edges():
    g = SparseGraph(4, [(0, 1), (2, 1), (3, 0)])
    assert g.m == 3
    assert g.edges().tolist() == [[0, 1], [0, 3], [1, 2]]
    for e in range(2 * g.m):
        r = g.rev[e]
        assert g.src[r] == g.dst[e] and g.dst[r] == g.src[e]
        assert g.rev[r] == e
    assert g.edge_index(1, 2) == g.rev[g.edge_index(2, 1)]
    with pytest.raises(KeyError):
        g.edge_index(0, 2)
    assert g.adjacency() == [[1, 3], [0, 2], [1], [0]]


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 1), (1, 0)], [(0, 5)], [(-1, 2)]])
def test_invalid_graphs(edges):
    with pytest.raises(ValueError):
        SparseGraph(3, edges)


@given(st.integers(2, 60), st.data())
def test_pair_inversion_exhaustive(n, data):
    total = n * (n - 1) // 2
    L = np.arange(total)
    i, j = _pair_from_index(L, n)
    expected = [(a, b) for a in range(n) for b in range(a + 1, n)]
    assert list(zip(i.tolist(), j.tolist())) == expected


def test_pair_inversion_large_n():
    n = 100_000
    total = n * (n - 1) // 2
    L = np.array([0, 1, n - 2, n - 1, total // 2, total - 2, total - 1])
    i, j = _pair_from_index(L, n)
    assert (i[0], j[0]) == (0, 1)
    assert (i[3], j[3]) == (1, 2)
    assert (i[-1], j[-1]) == (n - 2, n - 1)
    assert np.all(i < j)


def test_gnp_extremes(rng):
    assert sample_gnp(10, 0.0, rng).m == 0
    k5 = sample_gnp(5, 1.0, rng)
    assert k5.m == 10
    with pytest.raises(ValueError):
        sample_gnp(5, 1.5, rng)
    assert sample_gnp(0, 0.5, rng).n == 0


def test_gnp_edge_count_and_degrees():
    n, p = 100_000, 5 / 100_000
    N = n * (n - 1) // 2
    mean, sd = N * p, math.sqrt(N * p * (1 - p))
    for seed in range(20):
        g = sample_gnp(n, p, np.random.default_rng(seed))
        assert abs(g.m - mean) < 4 * sd
    deg = g.degrees
    assert abs(deg.mean() - 5) < 4 * math.sqrt(5 / n) * 2
    obs = np.bincount(np.minimum(deg, 21), minlength=22).astype(float)
    probs = stats.poisson.pmf(np.arange(21), 5 * (n - 1) / n)
    probs = np.append(probs, 1 - probs.sum())
    exp = probs * n
    keep = exp >= 5
    o = np.append(obs[keep], obs[~keep].sum())
    e = np.append(exp[keep], exp[~keep].sum())
    assert stats.chisquare(o, e).pvalue > 1e-3


def _bfs_ball(g, v, s):
    dist = {v: 0}
    q = deque([v])
    while q:
        u = q.popleft()
        for w in g.neighbors(u).tolist():
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    return {u for u, dd in dist.items() if dd <= s}


def test_neighborhood_examples():
    tri = SparseGraph(3, [(0, 1), (1, 2), (0, 2)])
    nb = extract_neighborhood(tri, 1, 1)
    assert sorted(nb.vertices) == [0, 1, 2] and len(nb.edges) == 3 and not nb.is_tree()
    path = SparseGraph(3, [(0, 1), (1, 2)])
    nb = extract_neighborhood(path, 0, 1, marks=[1, 0, 1])
    assert nb.edges == [(0, 1)] and nb.marks == {0: 1, 1: 0}
    nb = extract_neighborhood(path, 2, 0, marks=[1, 0, 1])
    assert nb.vertices == [2] and nb.edges == [] and nb.marks == {2: 1}
    with pytest.raises(IndexError):
        extract_neighborhood(path, 3, 1)


def test_neighborhood_matches_full_bfs(rng):
    g = sample_gnp(800, 4 / 800, rng)
    for v in rng.choice(g.n, 60, replace=False).tolist():
        for s in (0, 1, 2, 3):
            nb = extract_neighborhood(g, v, s)
            ball = _bfs_ball(g, v, s)
            assert set(nb.vertices) == ball
            assert all(nb.dist[u] <= s for u in nb.vertices)
            induced = {(a, b) for a, b in g.edges().tolist() if a in ball and b in ball}
            assert set(nb.edges) == induced


def test_edge_list_round_trip(rng, tmp_path):
    g = sample_gnp(1000, 5 / 1000, rng)
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    assert read_edge_list(path) == g
    buf = io.StringIO()
    write_edge_list(SparseGraph(7), buf)
    assert buf.getvalue() == "n=7\n"
    assert read_edge_list(io.StringIO(buf.getvalue())) == SparseGraph(7)
    buf = io.StringIO()
    write_edge_list(SparseGraph(3, [(0, 1), (1, 2), (0, 2)]), buf)
    assert buf.getvalue().splitlines()[1:] == ["0 1", "0 2", "1 2"]


@pytest.mark.parametrize(
    "text,line",
    [
        ("3\n0 1\n", 1),
        ("n=x\n", 1),
        ("n=3\n0 1 2\n", 2),
        ("n=3\n0 a\n", 2),
        ("n=3\n0 1\n0 3\n", 3),
        ("n=3\n1 0\n", 2),
        ("n=3\n0 1\n1 2\n0 1\n", 4),
    ],
)
def test_edge_list_errors(text, line):
    with pytest.raises(EdgeListError) as err:
        read_edge_list(io.StringIO(text))
    assert err.value.lineno == line
    assert f"line {line}" in str(err.value)
