import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from core_mantle.graph import SparseGraph, sample_gnp
from core_mantle.kcore import peel_core
from core_mantle.wp import (
    MessageState,
    MonotonicityError,
    NonConvergenceError,
    trace_to_csv,
    wp_density_trace,
    wp_init,
    wp_run,
    wp_run_to_fixpoint,
    wp_step,
)
from oracles import naive_wp

K5 = SparseGraph(5, list(itertools.combinations(range(5), 2)))
C5 = SparseGraph(5, [(i, (i + 1) % 5) for i in range(5)])
STAR = SparseGraph(6, [(0, i) for i in range(1, 6)])


def test_init_examples():
    assert not wp_init(C5, 3).marks.any()
    assert wp_init(K5, 3).marks.all()
    empty = wp_init(SparseGraph(4), 3)
    assert len(empty.messages) == 0 and not empty.marks.any() and empty.t == 0
    assert np.isnan(empty.message_density)


def test_complete_graph_is_stable():
    st_ = wp_init(K5, 3)
    for _ in range(5):
        st_ = wp_step(st_, K5, 3)
        assert st_.messages.all() and st_.marks.all()


def test_star():
    s0 = wp_init(STAR, 3)
    assert s0.marks[0]
    s1 = wp_step(s0, STAR, 3)
    leaf_to_centre = [STAR.edge_index(i, 0) for i in range(1, 6)]
    assert not s1.messages[leaf_to_centre].any()
    assert not s1.marks[0]


@pytest.mark.parametrize("seed", range(8))
def test_rounds_match_naive_recomputation(seed):
    rng = np.random.default_rng(seed)
    g = sample_gnp(50, 4 / 50, rng)
    edges = g.edges().tolist()
    for k in (3, 4):
        state = wp_init(g, k)
        for t in range(6):
            msgs, marks = naive_wp(50, edges, k, t)
            got = {(int(g.src[e]), int(g.dst[e])): int(state.messages[e]) for e in range(2 * g.m)}
            assert got == msgs
            assert state.marks.astype(int).tolist() == marks
            state = wp_step(state, g, k)


def test_monotonicity_violation_detected():
    s0 = wp_init(K5, 3)
    msgs = s0.messages.copy()
    msgs[0] = 0  # every source still hears 1 from three others, so this bit turns back on
    with pytest.raises(MonotonicityError):
        wp_step(MessageState(0, 3, msgs, s0.marks), K5, 3)


def test_state_graph_mismatch():
    with pytest.raises(ValueError):
        wp_step(wp_init(K5, 3), STAR, 3)


@given(st.integers(1, 40), st.data())
def test_forest_fixpoint_is_empty(n, data):
    parents = [data.draw(st.integers(-1, v - 1)) for v in range(n)]
    g = SparseGraph(n, [(p, v) for v, p in enumerate(parents) if p >= 0])
    state, t = wp_run_to_fixpoint(g, 3)
    assert not state.marks.any()
    assert t <= 2 * g.m + 1


@pytest.mark.parametrize("d", [1, 3, 5, 8])
def test_fixpoint_equals_core(rng, d):
    for k in (3, 4, 5):
        g = sample_gnp(2000, d / 2000, rng)
        core = peel_core(g, k).membership
        state, t = wp_run_to_fixpoint(g, k)
        assert np.array_equal(state.marks, core)
        assert t <= 2 * g.m + 1
        # intermediate rounds only ever over-approximate the core
        for r in range(t + 1):
            assert not np.any(core & ~wp_run(g, k, r).marks)


def test_nonconvergence_reported():
    g = sample_gnp(300, 5 / 300, np.random.default_rng(1))
    _, t = wp_run_to_fixpoint(g, 3)
    assert t > 1
    with pytest.raises(NonConvergenceError):
        wp_run_to_fixpoint(g, 3, t_cap=1)
    with pytest.raises(ValueError):
        wp_run_to_fixpoint(g, 3, t_cap=0)


def test_trace(rng):
    g = sample_gnp(3000, 5 / 3000, rng)
    core = peel_core(g, 3).membership
    rows = wp_density_trace(g, 3, 25, core)
    assert [r.t for r in rows] == list(range(26))
    ex = [r.excess_fraction for r in rows]
    assert all(b <= a for a, b in zip(ex, ex[1:]))
    dens = [r.message_density for r in rows]
    assert dens[0] == 1.0 and all(b <= a for a, b in zip(dens, dens[1:]))
    text = trace_to_csv(rows)
    assert text.splitlines()[0] == "t,message_density,mark_fraction,excess_fraction"
    assert len(text.splitlines()) == 27


def test_trace_rejects_non_core():
    with pytest.raises(AssertionError):
        wp_density_trace(STAR, 3, 2, np.ones(6, dtype=bool))


def test_mark_fraction_tracks_same_round_density():
    """Marks use same-round messages, so the round-t mark fraction follows
    P[Po(d p^(t)) >= k]."""
    from core_mantle.fixedpoint import CoreParams, density_trajectory, mark_density

    n, d, k = 100_000, 5.0, 3
    g = sample_gnp(n, d / n, np.random.default_rng(66))
    rows = wp_density_trace(g, k, 20, peel_core(g, k).membership)
    traj = density_trajectory(CoreParams(d, k), 20)
    for r in rows:
        assert abs(r.mark_fraction - mark_density(CoreParams(d, k), traj[r.t])) <= 0.01
        assert abs(r.message_density - traj[r.t]) <= 0.01
