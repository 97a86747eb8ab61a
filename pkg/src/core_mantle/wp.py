"""Warning Propagation on finite graphs.

All messages start at 1. In each synchronous round the message v -> w
becomes 1 iff v received at least k - 1 one-messages from its other
neighbours in the previous round; v is marked 1 iff it receives at least
k one-messages in the current round. Messages only ever switch off, and
the fixpoint marks are exactly the k-core.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .graph import SparseGraph


class MonotonicityError(AssertionError):
    """A message or mark switched from 0 back to 1."""


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class MessageState:
    t: int
    k: int
    messages: np.ndarray  # uint8 per directed edge, indexed like g.dst
    marks: np.ndarray  # bool per vertex

    @property
    def message_density(self) -> float:
        return float(self.messages.mean()) if len(self.messages) else float("nan")

    @property
    def mark_fraction(self) -> float:
        return float(self.marks.mean()) if len(self.marks) else float("nan")


def _incoming(g: SparseGraph, messages: np.ndarray) -> np.ndarray:
    # sum over u of mu_{u -> v}
    return np.bincount(g.dst, weights=messages, minlength=g.n).astype(np.int64)


def wp_init(g: SparseGraph, k: int) -> MessageState:
    messages = np.ones(2 * g.m, dtype=np.uint8)
    return MessageState(0, k, messages, _incoming(g, messages) >= k)


def wp_step(state: MessageState, g: SparseGraph, k: int | None = None) -> MessageState:
    """One synchronous round; raises MonotonicityError if any bit turns on."""
    k = state.k if k is None else k
    old = state.messages
    if len(old) != 2 * g.m:
        raise ValueError("message state does not belong to this graph")
    incoming = _incoming(g, old)
    # exclude the message coming back along the same edge
    new = ((incoming[g.src] - old[g.rev]) >= k - 1).astype(np.uint8)
    if np.any(new > old):
        raise MonotonicityError(f"message increased in round {state.t + 1}")
    marks = _incoming(g, new) >= k
    if np.any(marks & ~state.marks):
        raise MonotonicityError(f"mark increased in round {state.t + 1}")
    return MessageState(state.t + 1, k, new, marks)


def wp_run(g: SparseGraph, k: int, t: int) -> MessageState:
    if t < 0:
        raise ValueError("t must be >= 0")
    state = wp_init(g, k)
    for _ in range(t):
        state = wp_step(state, g, k)
    return state


def wp_run_to_fixpoint(g: SparseGraph, k: int, t_cap: int | None = None) -> tuple[MessageState, int]:
    """Iterate until a round changes nothing; returns (state, rounds used).

    Every productive round switches off at least one of the 2m messages,
    so the default cap 2m + 1 can never be exhausted.
    """
    if t_cap is None:
        t_cap = 2 * g.m + 1
    if t_cap < 1:
        raise ValueError("t_cap must be >= 1")
    state = wp_init(g, k)
    for _ in range(t_cap):
        nxt = wp_step(state, g, k)
        if np.array_equal(nxt.messages, state.messages):
            return state, state.t
        state = nxt
    raise NonConvergenceError(f"Warning Propagation did not converge within {t_cap} rounds")


@dataclass(frozen=True)
class TraceRow:
    t: int
    message_density: float
    mark_fraction: float
    excess_fraction: float


def wp_density_trace(g: SparseGraph, k: int, t_max: int, core: np.ndarray) -> list[TraceRow]:
    """Per-round message density, mark fraction and excess over the core.

    ``core`` is the boolean core membership (e.g. from peel_core). The
    excess is |{v marked 1} \\ core| / n.
    """
    core = np.asarray(core, dtype=bool)
    rows = []
    state = wp_init(g, k)
    n = max(g.n, 1)
    for t in range(t_max + 1):
        if t:
            state = wp_step(state, g, k)
        if np.any(core & ~state.marks):
            raise AssertionError(f"core vertex lost its mark at round {t}")
        excess = float(np.count_nonzero(state.marks & ~core)) / n
        rows.append(TraceRow(t, state.message_density, state.mark_fraction, excess))
    return rows


TRACE_COLUMNS = ("t", "message_density", "mark_fraction", "excess_fraction")


def trace_to_csv(rows: list[TraceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in rows:
        w.writerow([r.t, repr(r.message_density), repr(r.mark_fraction), repr(r.excess_fraction)])
    return buf.getvalue()
