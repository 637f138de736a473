"""Best-bound branch-and-bound over binary columns of a live LP session."""

from __future__ import annotations

import heapq
import time
from typing import Callable

import numpy as np

from .lp import LpSession, SolveOptions, SolveStats, Status

Heuristic = Callable[[np.ndarray], "tuple[np.ndarray, float] | None"]


def _apply(sess: LpSession, binaries: np.ndarray, fix: dict[int, int]) -> None:
    lo = np.zeros(binaries.size)
    hi = np.ones(binaries.size)
    for k, col in enumerate(binaries):
        v = fix.get(int(col))
        if v is not None:
            lo[k] = hi[k] = v
    sess.set_col_bounds(binaries, lo, hi)


def branch_and_bound(
    sess: LpSession,
    binaries: np.ndarray,
    options: SolveOptions,
    stats: SolveStats,
    heuristic: Heuristic | None = None,
    deadline: float = float("inf"),
    int_tol: float = 1e-6,
    gap_tol: float = 1e-9,
) -> tuple[np.ndarray | None, float, Status]:
    """Maximise over the session with ``binaries`` restricted to {0, 1}.

    Nodes are explored best-bound first; branching picks the most
    fractional binary (smallest column index on ties). ``heuristic`` maps a
    relaxation point to an integer-feasible ``(x, objective)`` or None.
    """
    binaries = np.asarray(binaries, dtype=np.int64)
    best_x, best_obj = None, -np.inf
    heap: list[tuple[float, int, dict[int, int]]] = [(-np.inf, 0, {})]
    counter = 1
    status = Status.OPTIMAL
    bound = np.inf

    def close(obj: float) -> bool:
        return obj <= best_obj + gap_tol * max(1.0, abs(best_obj))

    while heap:
        neg_parent, _, fix = heapq.heappop(heap)
        if best_x is not None and close(-neg_parent):
            continue
        if stats.nodes >= options.milp_node_limit:
            status = Status.ITERATION_LIMIT
            heap.append((neg_parent, 0, fix))
            break
        if time.perf_counter() >= deadline:
            status = Status.TIME_LIMIT
            heap.append((neg_parent, 0, fix))
            break
        _apply(sess, binaries, fix)
        sess.set_time_limit(deadline - time.perf_counter())
        st = sess.solve()
        stats.nodes += 1
        stats.lp_solves += 1
        if st == Status.INFEASIBLE:
            continue
        if st != Status.OPTIMAL:
            status = st
            break
        x, obj = sess.x.copy(), sess.objective
        if stats.nodes == 1:
            bound = obj
            stats.bound = obj
        if best_x is not None and close(obj):
            continue
        zb = x[binaries]
        frac = np.abs(zb - np.round(zb))
        if frac.max(initial=0.0) <= int_tol:
            best_x, best_obj = x, obj
            stats.objective_history.append(obj)
            continue
        if heuristic is not None:
            found = heuristic(x)
            if found is not None and found[1] > best_obj:
                best_x, best_obj = found
                stats.objective_history.append(best_obj)
            _apply(sess, binaries, fix)
            if close(obj):
                continue
        k = int(np.argmax(frac))  # distance to nearest integer, so max is most fractional
        col = int(binaries[k])
        for v in (1, 0) if zb[k] >= 0.5 else (0, 1):
            child = dict(fix)
            child[col] = v
            heapq.heappush(heap, (-obj, counter, child))
            counter += 1
    open_bounds = [-b for b, _, _ in heap if np.isfinite(b)]
    stats.bound = max([best_obj] + open_bounds) if best_x is not None else bound
    return best_x, best_obj, status
