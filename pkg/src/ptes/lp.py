"""Sparse LP container and a thin deterministic wrapper around HiGHS.

:class:`LpSession` keeps a HiGHS model alive so cut loops and branch-and-bound
can add rows or change bounds and re-solve from the previous basis.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import highspy
import numpy as np
import scipy.sparse as sp

INF = highspy.kHighsInf


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    ITERATION_LIMIT = "IterationLimit"
    TIME_LIMIT = "TimeLimit"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ERROR = "Error"


@dataclass(frozen=True)
class SolveOptions:
    feasibility_tol: float = 1e-7
    cut_tol: float = 1e-5  # capability fraction
    max_cut_rounds: int = 200
    damping: float = 0.5
    p_tol: float = 1e-4
    max_fixed_point_iters: int = 60
    fixed_point_stall: int = 20  # iterations without a better residual before giving up
    time_limit: float = float("inf")
    p_floor: float = 0.3
    # initial tangent points (charging-side SoC percent, mirrored for discharging)
    initial_cut_points: tuple[float, ...] = (50.0, 70.0, 80.0, 87.0, 93.0, 97.0, 100.0)
    milp_horizon_cap: int = 336
    milp_node_limit: int = 100_000
    milp_formulation: str = "multiple_choice"
    lp_method: str = "choose"  # HiGHS 'solver' option for one-shot LPs

    def __post_init__(self):
        if min(self.feasibility_tol, self.cut_tol, self.p_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class SolveStats:
    status: Status = Status.OPTIMAL
    wall_time: float = 0.0
    iterations: int = 0  # simplex/IPM iterations summed over LP solves
    lp_solves: int = 0
    cut_rounds: int = 0
    cuts_added: int = 0
    fixed_point_iters: int = 0
    nodes: int = 0
    max_violation: float = 0.0
    bound: float | None = None
    objective_history: list[float] = field(default_factory=list)
    violation_history: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["status"] = self.status.value
        return d


@dataclass
class LpInstance:
    """``sense`` objective ``c @ x`` subject to ``row_lo <= A x <= row_hi`` and column bounds."""

    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    sense: str = "max"
    integrality: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.A = sp.csr_matrix(self.A)
        if self.A.shape[1] != n:
            raise ValueError(f"A has {self.A.shape[1]} columns, objective has {n}")
        m = self.A.shape[0]
        self.row_lo = np.asarray(self.row_lo, dtype=float)
        self.row_hi = np.asarray(self.row_hi, dtype=float)
        self.col_lo = np.asarray(self.col_lo, dtype=float)
        self.col_hi = np.asarray(self.col_hi, dtype=float)
        if self.row_lo.shape != (m,) or self.row_hi.shape != (m,):
            raise ValueError("row bound arrays must match the row count")
        if self.col_lo.shape != (n,) or self.col_hi.shape != (n,):
            raise ValueError("column bound arrays must match the column count")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A.data))):
            raise ValueError("objective and matrix coefficients must be finite")
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")

    @property
    def n_cols(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


_STATUS_MAP = {
    highspy.HighsModelStatus.kOptimal: Status.OPTIMAL,
    highspy.HighsModelStatus.kInfeasible: Status.INFEASIBLE,
    highspy.HighsModelStatus.kUnbounded: Status.UNBOUNDED,
    highspy.HighsModelStatus.kUnboundedOrInfeasible: Status.INFEASIBLE,
    highspy.HighsModelStatus.kTimeLimit: Status.TIME_LIMIT,
    highspy.HighsModelStatus.kIterationLimit: Status.ITERATION_LIMIT,
}


def _clean_bounds(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).copy()
    x[x >= 1e30] = INF
    x[x <= -1e30] = -INF
    return x


class LpSession:
    """A live HiGHS model built from an :class:`LpInstance`."""

    def __init__(self, inst: LpInstance, options: SolveOptions | None = None, method: str | None = None):
        self.options = options or SolveOptions()
        self.n_cols = inst.n_cols
        self.sense = inst.sense
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("primal_feasibility_tolerance", self.options.feasibility_tol)
        h.setOptionValue("dual_feasibility_tolerance", self.options.feasibility_tol)
        h.setOptionValue("solver", method or self.options.lp_method)
        lp = highspy.HighsLp()
        lp.num_col_ = inst.n_cols
        lp.num_row_ = inst.n_rows
        lp.col_cost_ = inst.c
        lp.col_lower_ = _clean_bounds(inst.col_lo)
        lp.col_upper_ = _clean_bounds(inst.col_hi)
        lp.row_lower_ = _clean_bounds(inst.row_lo)
        lp.row_upper_ = _clean_bounds(inst.row_hi)
        csc = inst.A.tocsc()
        csc.sort_indices()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr.astype(np.int32)
        lp.a_matrix_.index_ = csc.indices.astype(np.int32)
        lp.a_matrix_.value_ = csc.data.astype(float)
        lp.sense_ = highspy.ObjSense.kMaximize if inst.sense == "max" else highspy.ObjSense.kMinimize
        h.passModel(lp)
        self.h = h
        self.x: np.ndarray | None = None
        self.row_dual: np.ndarray | None = None
        self.col_dual: np.ndarray | None = None
        self.objective: float = float("nan")
        self.status: Status = Status.ERROR
        self.iterations = 0
        self.solves = 0

    @property
    def n_rows(self) -> int:
        return self.h.getNumRow()

    def set_time_limit(self, seconds: float) -> None:
        """Limit the next solves to ``seconds`` of wall time from now."""
        # HiGHS measures its limit against a run clock that accumulates over re-solves
        limit = self.h.getRunTime() + max(seconds, 1e-3) if np.isfinite(seconds) else INF
        self.h.setOptionValue("time_limit", float(limit))

    def solve(self) -> Status:
        self.h.run()
        ms = self.h.getModelStatus()
        self.status = _STATUS_MAP.get(ms, Status.ERROR)
        info = self.h.getInfo()
        self.iterations += int(max(info.simplex_iteration_count, 0)) + int(max(info.ipm_iteration_count, 0))
        self.solves += 1
        if self.status == Status.OPTIMAL:
            sol = self.h.getSolution()
            self.x = np.array(sol.col_value)
            self.row_dual = np.array(sol.row_dual)
            self.col_dual = np.array(sol.col_dual)
            self.objective = float(info.objective_function_value)
        return self.status

    def add_rows(self, rows: sp.spmatrix, lo, hi) -> int:
        """Append rows; returns the index of the first new row."""
        first = self.n_rows
        rows = sp.csr_matrix(rows)
        if rows.shape[0] == 0:
            return first
        rows.sort_indices()
        self.h.addRows(
            rows.shape[0],
            _clean_bounds(lo),
            _clean_bounds(hi),
            rows.nnz,
            rows.indptr[:-1].astype(np.int32),
            rows.indices.astype(np.int32),
            rows.data.astype(float),
        )
        return first

    def delete_rows(self, indices) -> None:
        idx = np.asarray(sorted(indices), dtype=np.int32)
        if idx.size:
            self.h.deleteRows(idx.size, idx)

    def set_col_bounds(self, cols, lo, hi) -> None:
        cols = np.asarray(cols, dtype=np.int32)
        if cols.size:
            self.h.changeColsBounds(cols.size, cols, _clean_bounds(lo), _clean_bounds(hi))

    def col_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lp = self.h.getLp()
        return np.array(lp.col_lower_), np.array(lp.col_upper_)


def solve_lp(instance: LpInstance, options: SolveOptions | None = None) -> tuple[np.ndarray | None, SolveStats]:
    """Solve an LP once. Returns ``(x, stats)``; ``x`` is None unless optimal."""
    options = options or SolveOptions()
    t0 = time.perf_counter()
    sess = LpSession(instance, options)
    sess.set_time_limit(options.time_limit)
    status = sess.solve()
    stats = SolveStats(
        status=status,
        wall_time=time.perf_counter() - t0,
        iterations=sess.iterations,
        lp_solves=1,
    )
    if status == Status.OPTIMAL:
        stats.bound = sess.objective
        stats.objective_history.append(sess.objective)
        return sess.x, stats
    return None, stats


class RowBuilder:
    """Accumulates sparse rows as COO triplets."""

    def __init__(self, n_cols: int):
        self.n_cols = n_cols
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []
        self.lo: list[np.ndarray] = []
        self.hi: list[np.ndarray] = []
        self.n_rows = 0
        self.labels: dict[str, slice] = {}

    def add(self, label: str, n: int, entries, lo, hi) -> slice:
        """Add ``n`` rows. ``entries`` is a list of (row_offsets, cols, vals) arrays."""
        start = self.n_rows
        for r, c, v in entries:
            r = np.broadcast_to(np.asarray(r, dtype=np.int64), np.broadcast_shapes(np.shape(r), np.shape(c), np.shape(v)))
            self.rows.append(start + r.ravel())
            self.cols.append(np.broadcast_to(np.asarray(c, dtype=np.int64), r.shape).ravel())
            self.vals.append(np.broadcast_to(np.asarray(v, dtype=float), r.shape).ravel())
        self.lo.append(np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy())
        self.hi.append(np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy())
        self.n_rows += n
        sl = slice(start, start + n)
        if label in self.labels:
            prev = self.labels[label]
            if prev.stop == start:
                sl = slice(prev.start, start + n)
        self.labels[label] = sl
        return slice(start, start + n)

    def matrix(self) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((0, self.n_cols))
        return sp.csr_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.n_rows, self.n_cols),
        )

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.lo:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(self.lo), np.concatenate(self.hi)
