"""Solvers for dispatch problems.

* linear families (C, D, D2, E): one LP solve;
* Model B: tangent-cut outer approximation of the concave capability;
* Model A: damped fixed point on the part-load profile around the Model B
  cut loop;
* Model C as a MILP with explicit segment selection, solved by
  branch-and-bound.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np
import scipy.sparse as sp

from .bnb import branch_and_bound
from .capability import CapabilitySpec
from .cutting import CutLoop
from .dispatch import DispatchProblem, DispatchSolution, core_rows, part_load, validate_solution
from .errors import UnsupportedSpec
from .lp import INF, LpInstance, LpSession, SolveOptions, SolveStats, Status, solve_lp

__all__ = [
    "solve",
    "solve_piecewise_lp",
    "solve_convex_b",
    "solve_model_a",
    "part_load_fixed_point",
    "part_load_violation",
    "solve_milp_piecewise",
    "time_solve",
]


DENSE_SEGMENTS = 10  # above this many chords per side, "choose" means interior point


def _deadline(options: SolveOptions, t0: float) -> float:
    return t0 + options.time_limit if np.isfinite(options.time_limit) else float("inf")


def _empty_solution(problem: DispatchProblem, stats: SolveStats) -> DispatchSolution:
    H = problem.horizon
    z = np.zeros(H)
    return DispatchSolution(problem.spec.tag, z, z.copy(), z.copy(), float("nan"), stats)


def solve_piecewise_lp(problem: DispatchProblem, options: SolveOptions | None = None) -> DispatchSolution:
    """Direct LP solve for the linear-representable families."""
    if not problem.spec.is_linear:
        raise UnsupportedSpec(f"Model {problem.spec.tag} is not linear-representable")
    options = options or SolveOptions()
    if options.lp_method == "choose" and problem.spec.n_segments > DENSE_SEGMENTS:
        # many near-parallel rows per hour stall the simplex; IPM with crossover does not
        options = replace(options, lp_method="ipm")
    x, stats = solve_lp(problem.lp, options)
    if x is None:
        return _empty_solution(problem, stats)
    sol = DispatchSolution.from_vector(problem, x, stats)
    stats.max_violation = validate_solution(problem, sol).capability_violation
    return sol


def _mirror(points, side: str) -> list[float]:
    return list(points) if side == "charge" else [100.0 - p for p in points]


def _curve_fns(spec: CapabilitySpec, links, p_profiles=None):
    """eta/slope callables for the cut loop; ``p_profiles`` is per-link part-load."""

    def eta(li, pct, hours):
        p = None if p_profiles is None else p_profiles[li][hours]
        return np.asarray(spec.eta(pct, links[li].side, p), dtype=float)

    def slope(li, pct, hours):
        p = None if p_profiles is None else p_profiles[li][hours]
        return np.asarray(spec.slope(pct, links[li].side, p), dtype=float)

    return eta, slope


def solve_convex_b(
    problem: DispatchProblem,
    options: SolveOptions | None = None,
    seed_points: tuple[float, ...] | None = None,
) -> DispatchSolution:
    """Outer approximation of Model B by tangent cuts.

    Starts from tangents at ``seed_points`` (charging-side SoC, mirrored for
    discharging) and adds, each round, the most violated tangent per hour
    until every capability violation is below ``options.cut_tol``.
    ``stats.bound`` is the final relaxation objective (an upper bound).
    """
    if problem.spec.family != "B":
        raise UnsupportedSpec("solve_convex_b needs a Model B spec")
    options = options or SolveOptions()
    t0 = time.perf_counter()
    stats = SolveStats()
    sess = LpSession(problem.lp, options, method="simplex")
    links = problem.links
    eta, slope = _curve_fns(problem.spec, links)
    loop = CutLoop(sess, links, eta, slope, options)
    points = options.initial_cut_points if seed_points is None else seed_points
    loop.seed(lambda li: _mirror(points, links[li].side))
    status = loop.run(stats, _deadline(options, t0))
    stats.status = status
    stats.cuts_added = loop.cuts_added
    stats.iterations = sess.iterations
    stats.wall_time = time.perf_counter() - t0
    if sess.x is None:
        return _empty_solution(problem, stats)
    stats.bound = sess.objective
    return DispatchSolution.from_vector(problem, sess.x, stats)


def part_load_violation(spec: CapabilitySpec, links, x: np.ndarray, p_floor: float = 0.3) -> float:
    """Largest Model A capability violation (fraction of nameplate) with p = w / w_max."""
    worst = 0.0
    for link in links:
        w = link.power(x)
        wm = np.maximum(link.w_max, 1e-12)
        p = np.clip(w / wm, p_floor, 1.0)
        eta = spec.eta(link.pct(x), link.side, p)
        worst = max(worst, float(np.max(w / wm - eta, initial=0.0)))
    return worst


def part_load_fixed_point(sess: LpSession, links, spec: CapabilitySpec, options: SolveOptions,
                          stats: SolveStats, deadline: float = float("inf"), p0=None):
    """Damped fixed point on the per-hour part-load profile around a cut loop.

    Start at full load. At fixed part-load the capability is concave in SoC,
    so the Model B cut loop applies; then move each hour's part-load toward
    ``w / w_max`` (idle hours toward ``p_floor``) with damping ``theta``,
    halved whenever the residual stalls. Stop when the largest residual over
    active hour-sides is below ``p_tol``; give up (IterationLimit) after ``max_fixed_point_iters``
    or when the best residual has not improved for ``fixed_point_stall``
    iterations.

    ``p0`` optionally replaces the full-load start (one array per link).
    Returns ``(x, status, p, best)`` where ``best`` is ``(x, p)`` of the best
    iterate that satisfies the true constraint, or None.
    """
    p = [np.ones(len(link)) for link in links] if p0 is None else [np.asarray(q, float).copy() for q in p0]
    theta = options.damping
    better = (lambda a, b: a > b) if sess.sense == "max" else (lambda a, b: a < b)
    best, best_obj = None, None
    x_last = None
    status = Status.ITERATION_LIMIT
    residuals: list[float] = []
    feas_tol = max(options.cut_tol, 10 * options.p_tol)
    best_residual, since_best = np.inf, 0
    for it in range(options.max_fixed_point_iters):
        stats.fixed_point_iters = it + 1
        eta, slope = _curve_fns(spec, links, p)
        loop = CutLoop(sess, links, eta, slope, options)
        loop.seed(lambda li: _mirror(options.initial_cut_points, links[li].side))
        inner = SolveStats()
        st = loop.run(inner, deadline)
        stats.lp_solves += inner.lp_solves
        stats.cut_rounds += inner.cut_rounds
        stats.cuts_added += loop.cuts_added
        if st not in (Status.OPTIMAL, Status.ITERATION_LIMIT):
            status = st
            break
        x_last = sess.x.copy()
        stats.objective_history.append(sess.objective)
        loads = [link.power(x_last) / np.maximum(link.w_max, 1e-12) for link in links]
        targets = [np.clip(u, options.p_floor, 1.0) for u in loads]
        # an idle hour-side is feasible at any p, so only active ones count
        delta = max(float(np.max(np.abs(t - q)[u > 1e-9], initial=0.0)) for t, q, u in zip(targets, p, loads))
        viol = part_load_violation(spec, links, x_last, options.p_floor)
        stats.violation_history.append(viol)
        if viol <= feas_tol and (best is None or better(sess.objective, best_obj)):
            best, best_obj = (x_last, [q.copy() for q in p]), sess.objective
        if delta <= options.p_tol and st == Status.OPTIMAL:
            status = Status.OPTIMAL
            break
        if time.perf_counter() >= deadline:
            status = Status.TIME_LIMIT
            break
        if delta < best_residual:
            best_residual, since_best = delta, 0
        else:
            since_best += 1
            if since_best >= options.fixed_point_stall:
                stats.notes.append(f"part-load residual stalled at {best_residual:.3g}")
                break
        residuals.append(delta)
        if len(residuals) >= 3 and residuals[-1] >= 0.9 * min(residuals[-3:-1]):
            theta = max(theta / 2, options.damping / 64)  # stagnating: shorten the step
        p = [(1 - theta) * q + theta * t for q, t in zip(p, targets)]
        loop.clear()
    return x_last, status, p, best


def solve_model_a(problem: DispatchProblem, options: SolveOptions | None = None) -> DispatchSolution:
    """Model A by a damped fixed point on the part-load profile (see
    :func:`part_load_fixed_point`). The best A-feasible iterate is returned
    with status IterationLimit when the loop does not converge.
    """
    if problem.spec.family != "A":
        raise UnsupportedSpec("solve_model_a needs a Model A spec")
    options = options or SolveOptions()
    t0 = time.perf_counter()
    stats = SolveStats()
    sess = LpSession(problem.lp, options, method="simplex")
    x, status, p, best = part_load_fixed_point(sess, problem.links, problem.spec, options, stats,
                                               _deadline(options, t0))
    stats.status = status
    stats.iterations = sess.iterations
    stats.wall_time = time.perf_counter() - t0
    if status != Status.OPTIMAL and best is not None:
        x, p = best
        stats.notes.append("returning best A-feasible iterate")
    if x is None:
        return _empty_solution(problem, stats)
    out = DispatchSolution.from_vector(problem, x, stats, p_ch=p[0], p_dis=p[1])
    idle = int(np.sum(out.w_ch <= 0) + np.sum(out.w_dis <= 0))
    stats.notes.append(f"idle hour-sides bounded at p_floor={options.p_floor}: {idle}")
    stats.max_violation = validate_solution(problem, out, p_floor=options.p_floor).capability_violation
    return out


def _milp_instance(problem: DispatchProblem, formulation: str):
    """Extend the dispatch core with explicit segment selection.

    Returns ``(instance, binary_cols, region_info)`` where region_info lists,
    per side, the binary columns (H x N) and the side's breakpoints.
    """
    spec = problem.spec
    H = problem.horizon
    d = problem.design
    base_cols = 3 * H
    blocks = []  # (side, w_cols, bps, segs)
    for side, w0 in (("charge", 0), ("discharge", H)):
        blocks.append((side, np.arange(w0, w0 + H), spec.breakpoints_for(side), spec.segments(side)))
    n_extra_per_side = {"multiple_choice": 3, "big_m": 1}[formulation]
    N = spec.n_segments
    n = base_cols + 2 * n_extra_per_side * N * H
    core = core_rows(d, H)
    mats = [sp.hstack([core.matrix(), sp.csr_matrix((core.n_rows, n - base_cols))], format="csr")]
    lo0, hi0 = core.bounds()
    los, his = [lo0], [hi0]
    col_lo = np.concatenate([problem.lp.col_lo, np.zeros(n - base_cols)])
    col_hi = np.concatenate([problem.lp.col_hi, np.zeros(n - base_cols)])
    soc_cols = np.arange(2 * H, 3 * H)
    hours = np.arange(H)
    binaries = []
    regions = []
    nxt = base_cols

    def rows(entries, m, lo, hi):
        r = np.concatenate([e[0] for e in entries])
        c = np.concatenate([e[1] for e in entries])
        v = np.concatenate([np.broadcast_to(np.asarray(e[2], float), np.shape(e[0])) for e in entries])
        mats.append(sp.csr_matrix((v, (r, c)), shape=(m, n)))
        los.append(np.broadcast_to(np.asarray(lo, float), (m,)).copy())
        his.append(np.broadcast_to(np.asarray(hi, float), (m,)).copy())

    for side, w_cols, bps, segs in blocks:
        wmax = d.w_max(side)
        anchors = np.array((0.0, *bps, 100.0))
        z = np.arange(nxt, nxt + N * H).reshape(N, H)
        nxt += N * H
        col_hi[z.ravel()] = 1.0
        binaries.append(z.ravel())
        regions.append((side, z, anchors))
        # sum_n z = 1
        rows([(hours, z[k], 1.0) for k in range(N)], H, 1.0, 1.0)
        if formulation == "multiple_choice":
            s = np.arange(nxt, nxt + N * H).reshape(N, H)
            nxt += N * H
            w = np.arange(nxt, nxt + N * H).reshape(N, H)
            nxt += N * H
            col_hi[s.ravel()] = 100.0
            col_hi[w.ravel()] = wmax
            # 100*soc = sum_n s_n ; w = sum_n w_n
            rows([(hours, soc_cols, 100.0)] + [(hours, s[k], -1.0) for k in range(N)], H, 0.0, 0.0)
            rows([(hours, w_cols, 1.0)] + [(hours, w[k], -1.0) for k in range(N)], H, 0.0, 0.0)
            for k, seg in enumerate(segs):
                rows([(hours, s[k], 1.0), (hours, z[k], -anchors[k])], H, 0.0, INF)
                rows([(hours, s[k], 1.0), (hours, z[k], -anchors[k + 1])], H, -INF, 0.0)
                rows([(hours, w[k], 1.0), (hours, s[k], -wmax * seg.slope), (hours, z[k], -wmax * seg.intercept)],
                     H, -INF, 0.0)
        else:
            # region linking: sum z_n a_{n-1} <= pct <= sum z_n a_n
            rows([(hours, soc_cols, 100.0)] + [(hours, z[k], -anchors[k]) for k in range(N)], H, 0.0, INF)
            rows([(hours, soc_cols, 100.0)] + [(hours, z[k], -anchors[k + 1]) for k in range(N)], H, -INF, 0.0)
            for k, seg in enumerate(segs):
                big_m = wmax * (1.0 - min(seg.intercept, seg.intercept + 100.0 * seg.slope))
                rows([(hours, w_cols, 1.0), (hours, soc_cols, -100.0 * wmax * seg.slope), (hours, z[k], big_m)],
                     H, -INF, wmax * seg.intercept + big_m)
    c = np.concatenate([problem.lp.c, np.zeros(n - base_cols)])
    A = sp.vstack(mats, format="csr")
    inst = LpInstance(c=c, A=A, row_lo=np.concatenate(los), row_hi=np.concatenate(his),
                      col_lo=col_lo, col_hi=col_hi, sense="max")
    bins = np.concatenate(binaries)
    inst.integrality = np.zeros(n, dtype=int)
    inst.integrality[bins] = 1
    return inst, bins, regions


def solve_milp_piecewise(problem: DispatchProblem, options: SolveOptions | None = None) -> DispatchSolution:
    """Model C with binary segment selection per hour and side.

    ``options.milp_formulation`` chooses ``multiple_choice`` (disaggregated,
    LP relaxation equal to the hypograph) or ``big_m``. The incumbent
    heuristic assigns each hour to the region containing its relaxed SoC.
    """
    if problem.spec.family != "C":
        raise UnsupportedSpec("solve_milp_piecewise needs a Model C spec")
    options = options or SolveOptions()
    H = problem.horizon
    if H > options.milp_horizon_cap:
        raise UnsupportedSpec(f"horizon {H} exceeds the MILP cap of {options.milp_horizon_cap} h")
    t0 = time.perf_counter()
    deadline = _deadline(options, t0)
    inst, bins, regions = _milp_instance(problem, options.milp_formulation)
    sess = LpSession(inst, options, method="simplex")
    stats = SolveStats()
    soc_cols = slice(2 * H, 3 * H)

    def heuristic(x: np.ndarray):
        pct = np.clip(100.0 * x[soc_cols], 0.0, 100.0)
        lo_b, hi_b = np.zeros(bins.size), np.zeros(bins.size)
        pos = {int(c): k for k, c in enumerate(bins)}
        for side, z, anchors in regions:
            region = np.clip(np.searchsorted(anchors[1:-1], pct, side="right"), 0, z.shape[0] - 1)
            for h in range(H):
                k = pos[int(z[region[h], h])]
                lo_b[k] = hi_b[k] = 1.0
        sess.set_col_bounds(bins, lo_b, hi_b)
        sess.set_time_limit(deadline - time.perf_counter())
        st = sess.solve()
        stats.lp_solves += 1
        if st != Status.OPTIMAL:
            return None
        return sess.x.copy(), sess.objective

    x, obj, status = branch_and_bound(sess, bins, options, stats, heuristic, deadline)
    stats.status = status
    stats.iterations = sess.iterations
    stats.wall_time = time.perf_counter() - t0
    if x is None:
        return _empty_solution(problem, stats)
    sol = DispatchSolution.from_vector(problem, x[: 3 * H], stats)
    stats.max_violation = validate_solution(problem, sol).capability_violation
    return sol


def solve(problem: DispatchProblem, options: SolveOptions | None = None) -> DispatchSolution:
    """Dispatch to the right solver for the problem's capability family."""
    fam = problem.spec.family
    if fam == "A":
        return solve_model_a(problem, options)
    if fam == "B":
        return solve_convex_b(problem, options)
    return solve_piecewise_lp(problem, options)


def time_solve(
    problem: DispatchProblem,
    options: SolveOptions | None = None,
    repetitions: int = 5,
    solver=None,
    return_solutions: bool = False,
):
    """Repeat a solve ``repetitions`` times and keep every run's stats."""
    solver = solver or solve
    stats, sols = [], []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        sol = solver(problem, options)
        sol.stats.wall_time = time.perf_counter() - t0
        stats.append(sol.stats)
        sols.append(sol)
    return (stats, sols) if return_solutions else stats


def with_options(options: SolveOptions | None, **changes) -> SolveOptions:
    return replace(options or SolveOptions(), **changes)
