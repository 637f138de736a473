"""Capability rows and the tangent-cut loop shared by dispatch and CEM solves.

A capability link describes one family of hourly constraints

    w[h] <= w_max[h] * eta(pct[h]),   pct[h] = k[h] * state[h]

where ``state`` is an LP column (SoC fraction for dispatch, stored MWh for
the capacity model with ``k = 100 / E``). For concave ``eta`` every tangent
line over-estimates the curve, so tangent rows form an outer approximation
that the loop tightens round by round.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .lp import INF, LpSession, SolveOptions, SolveStats, Status


@dataclass
class CapabilityLink:
    side: str
    w_cols: np.ndarray
    s_cols: np.ndarray
    pct_per_unit: np.ndarray
    w_max: np.ndarray

    def __post_init__(self):
        n = len(self.w_cols)
        self.w_cols = np.asarray(self.w_cols, dtype=np.int64)
        self.s_cols = np.asarray(self.s_cols, dtype=np.int64)
        self.pct_per_unit = np.broadcast_to(np.asarray(self.pct_per_unit, dtype=float), (n,)).copy()
        self.w_max = np.broadcast_to(np.asarray(self.w_max, dtype=float), (n,)).copy()

    def __len__(self) -> int:
        return len(self.w_cols)

    def pct(self, x: np.ndarray) -> np.ndarray:
        return np.clip(self.pct_per_unit * x[self.s_cols], 0.0, 100.0)

    def power(self, x: np.ndarray) -> np.ndarray:
        return x[self.w_cols]

    def line_rows(self, n_cols: int, idx, slope, intercept):
        """Rows ``w - w_max*slope*k*s <= w_max*intercept`` for hours ``idx``."""
        idx = np.asarray(idx, dtype=np.int64)
        m = idx.size
        slope = np.broadcast_to(np.asarray(slope, dtype=float), (m,))
        intercept = np.broadcast_to(np.asarray(intercept, dtype=float), (m,))
        wm = self.w_max[idx]
        r = np.arange(m)
        rows = np.concatenate([r, r])
        cols = np.concatenate([self.w_cols[idx], self.s_cols[idx]])
        vals = np.concatenate([np.ones(m), -wm * slope * self.pct_per_unit[idx]])
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(m, n_cols))
        return mat, np.full(m, -INF), wm * intercept


def segment_rows(link: CapabilityLink, n_cols: int, segments) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """One linear row per segment per hour."""
    mats, los, his = [], [], []
    idx = np.arange(len(link))
    for seg in segments:
        m, lo, hi = link.line_rows(n_cols, idx, seg.slope, seg.intercept)
        mats.append(m)
        los.append(lo)
        his.append(hi)
    if not mats:
        return sp.csr_matrix((0, n_cols)), np.zeros(0), np.zeros(0)
    return sp.vstack(mats, format="csr"), np.concatenate(los), np.concatenate(his)


# eta(side_index, pct, hours) and slope(...) for a concave curve family
Curve = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


class CutLoop:
    """Kelley-style outer approximation of concave capability constraints.

    ``eta``/``slope`` take ``(link_index, pct, hours)`` so the curve may vary
    by hour (Model A at a fixed part-load profile).
    """

    def __init__(self, session: LpSession, links: Sequence[CapabilityLink], eta: Curve, slope: Curve,
                 options: SolveOptions):
        self.sess = session
        self.links = list(links)
        self.eta = eta
        self.slope = slope
        self.options = options
        # cut bookkeeping: row index, link and hour of every cut row
        self._rows = np.zeros(0, dtype=np.int64)
        self._link = np.zeros(0, dtype=np.int64)
        self._hour = np.zeros(0, dtype=np.int64)
        self.cuts_added = 0

    @property
    def cut_rows(self) -> list[int]:
        return self._rows.tolist()

    def _add_tangents(self, li: int, hours: np.ndarray, pct0: np.ndarray) -> None:
        if hours.size == 0:
            return
        link = self.links[li]
        e0 = self.eta(li, pct0, hours)
        g0 = self.slope(li, pct0, hours)
        mat, lo, hi = link.line_rows(self.sess.n_cols, hours, g0, e0 - g0 * pct0)
        first = self.sess.add_rows(mat, lo, hi)
        self._rows = np.concatenate([self._rows, np.arange(first, first + hours.size)])
        self._link = np.concatenate([self._link, np.full(hours.size, li)])
        self._hour = np.concatenate([self._hour, hours])
        self.cuts_added += hours.size

    def seed(self, points_for_link: Callable[[int], Sequence[float]], hours_for_link=None) -> None:
        """Add tangents at fixed SoC points for every hour of every link, or
        only for ``hours_for_link[li]`` when given."""
        for li, link in enumerate(self.links):
            hours = np.arange(len(link)) if hours_for_link is None else np.asarray(hours_for_link[li], dtype=np.int64)
            for pt in points_for_link(li):
                self._add_tangents(li, hours, np.full(hours.size, float(pt)))

    def seed_at(self, x: np.ndarray) -> None:
        """Add tangents at the SoC values of a previous solution."""
        for li, link in enumerate(self.links):
            hours = np.arange(len(link))
            self._add_tangents(li, hours, link.pct(x))

    def clear(self, hours_for_link=None) -> None:
        """Delete all cuts, or only those of ``hours_for_link[li]``."""
        if hours_for_link is None:
            drop = np.ones(self._rows.size, dtype=bool)
        else:
            drop = np.zeros(self._rows.size, dtype=bool)
            for li, hours in enumerate(hours_for_link):
                drop |= (self._link == li) & np.isin(self._hour, hours)
        if not drop.any():
            return
        gone = np.sort(self._rows[drop])
        self.sess.delete_rows(gone)
        keep = ~drop
        # rows after a deleted row move up by the number of deletions before them
        self._rows = self._rows[keep] - np.searchsorted(gone, self._rows[keep])
        self._link = self._link[keep]
        self._hour = self._hour[keep]

    def violations(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-link capability violation as a fraction of nameplate."""
        out = []
        for li, link in enumerate(self.links):
            hours = np.arange(len(link))
            cap = self.eta(li, link.pct(x), hours) * link.w_max
            scale = np.maximum(link.w_max, 1e-9)
            out.append((link.power(x) - cap) / scale)
        return out

    def run(self, stats: SolveStats, deadline: float = float("inf")) -> Status:
        """Solve, add the most violated tangent per hour, repeat."""
        opts = self.options
        rounds = 0
        while True:
            self.sess.set_time_limit(deadline - time.perf_counter())
            status = self.sess.solve()
            stats.lp_solves += 1
            if status != Status.OPTIMAL:
                return status
            x = self.sess.x
            stats.objective_history.append(self.sess.objective)
            viols = self.violations(x)
            stacked = np.vstack(viols) if viols else np.zeros((1, 0))
            worst = float(stacked.max()) if stacked.size else 0.0
            stats.violation_history.append(max(worst, 0.0))
            stats.max_violation = max(worst, 0.0)
            if worst <= opts.cut_tol:
                return Status.OPTIMAL
            if rounds >= opts.max_cut_rounds:
                return Status.ITERATION_LIMIT
            if time.perf_counter() >= deadline:
                return Status.TIME_LIMIT
            rounds += 1
            stats.cut_rounds += 1
            # one cut per hour: the link with the largest violation at that hour
            groups: dict[int, list[int]] = {}
            for li, link in enumerate(self.links):
                groups.setdefault(len(link), []).append(li)
            for n, members in groups.items():
                block = np.vstack([viols[li] for li in members])
                best = np.argmax(block, axis=0)
                top = block[best, np.arange(n)]
                for k, li in enumerate(members):
                    hours = np.nonzero((best == k) & (top > opts.cut_tol))[0]
                    self._add_tangents(li, hours, self.links[li].pct(x)[hours])
            stats.cuts_added = self.cuts_added
