"""Miniature capacity-expansion model with PTES capability constraints.

Zones with hourly demand, VRE generators, Li-ion and PTES storage, and
transport-model lines. Operations are modelled on K representative weeks
(168 h each) weighted by the number of calendar weeks they stand for. PTES
energy is linked across the 52-week calendar through week-boundary states.

Units: MW, MWh, $ per year. PTES energy is in thermal MWh.

PTES state linkage
------------------
Within representative week ``k`` the stored energy follows

    e[k,t] = (1-g) e[k,t-1] + a_ch wc[k,t] - a_dis wd[k,t],   e[k,-1] = S[rep(k)]

so that ``e[k,t] = (1-g)^(t+1) S[rep(k)] + d[k,t]`` with ``d`` the zero-start
trajectory. Any calendar week ``j`` mapped to ``k`` then has the trajectory
``(1-g)^(t+1) S[j] + d[k,t]`` and ends at

    S[j+1] = (1-g)^168 S[j] + d[k,167],     S[52] = S[0].

Optional excursion bounds ``emin[k] <= d[k,t] <= emax[k]`` with
``S[j] + emax[k(j)] <= E`` and ``(1-g)^168 S[j] + emin[k(j)] >= 0`` keep every
calendar week inside ``[0, E]``.

The capability constraint ``w <= W * eta(100 e / E)`` is bilinear in the
capacities, so non-E models are solved by successive linear programming:
linearise ``W e / E`` around the incumbent, solve inside a trust region on
the PTES capacities, and score the candidate with the exact fixed-capacity
problem (an LP, or a cut loop for concave curves).
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.sparse as sp
import yaml

from .analysis import DurationEcdf, storage_duration_ecdf
from .capability import CapabilitySpec, check_dominance
from .cutting import CapabilityLink, CutLoop, segment_rows
from .design import PtesDesign, reference_design
from .errors import CapabilityDominanceError, EmptyCluster, InconsistentNetwork, InputError, UnsupportedSpec
from .lp import INF, LpInstance, LpSession, RowBuilder, SolveOptions, SolveStats, Status
from .optimizer import _curve_fns, _mirror, part_load_fixed_point, part_load_violation

log = logging.getLogger(__name__)

WEEK = 168
WEEKS = 52
PTES_RATIO = 1.5  # charge capacity / discharge capacity

__all__ = [
    "Line",
    "Resource",
    "CemSystem",
    "RepresentativePeriods",
    "CemOptions",
    "CemProblem",
    "CemSolution",
    "cluster_weeks",
    "build_cem",
    "solve_cem",
    "solve_cem_specs",
    "cem_report",
    "cost_deltas",
    "toy_system",
    "load_system",
    "save_system",
    "validate_cem",
    "calendar_schedule",
]


# ---------------------------------------------------------------- system data


@dataclass(frozen=True)
class Line:
    name: str
    from_zone: str
    to_zone: str
    limit_mw: float


@dataclass(frozen=True)
class Resource:
    """A VRE plant or a storage unit in one zone.

    ``power_cost`` is $/MW-yr (discharge MW for storage), ``energy_cost``
    $/MWh-yr, ``var_cost`` $/MWh of output. ``technology`` is one of solar,
    wind (kind vre) or li_ion, ptes (kind storage).
    """

    name: str
    technology: str
    zone: str
    power_cost: float
    energy_cost: float = 0.0
    var_cost: float = 0.0
    cf_column: str | None = None
    efficiency: float = 0.92  # one-way, Li-ion only
    leakage: float = 0.0  # per hour, Li-ion only

    @property
    def kind(self) -> str:
        return "vre" if self.technology in ("solar", "wind") else "storage"

    def __post_init__(self):
        if self.technology not in ("solar", "wind", "li_ion", "ptes"):
            raise InputError(f"{self.name}: unknown technology {self.technology!r}")
        if min(self.power_cost, self.energy_cost, self.var_cost) < 0:
            raise InputError(f"{self.name}: costs must be non-negative")
        if self.kind == "vre" and not self.cf_column:
            raise InputError(f"{self.name}: VRE resources need a capacity-factor column")


@dataclass
class CemSystem:
    zones: list[str]
    lines: list[Line]
    resources: list[Resource]
    demand: pd.DataFrame  # hourly MW, one column per zone
    cf: pd.DataFrame  # hourly capacity factors, columns named by Resource.cf_column
    ptes: PtesDesign = field(default_factory=reference_design)
    nse_cost: float = 9000.0  # $/MWh of unserved demand
    energy_cost_basis: str = "thermal"  # PTES energy cost per thermal or electric MWh

    def __post_init__(self):
        zs = set(self.zones)
        if len(zs) != len(self.zones):
            raise InconsistentNetwork("duplicate zone names")
        for ln in self.lines:
            if ln.from_zone not in zs or ln.to_zone not in zs or ln.from_zone == ln.to_zone:
                raise InconsistentNetwork(f"line {ln.name} joins unknown or identical zones")
            if ln.limit_mw < 0:
                raise InconsistentNetwork(f"line {ln.name} has a negative limit")
        names = [r.name for r in self.resources]
        if len(set(names)) != len(names):
            raise InconsistentNetwork("duplicate resource names")
        for r in self.resources:
            if r.zone not in zs:
                raise InconsistentNetwork(f"resource {r.name} sits in unknown zone {r.zone}")
            if r.kind == "vre":
                if r.cf_column not in self.cf.columns:
                    raise InconsistentNetwork(f"resource {r.name}: no capacity-factor column {r.cf_column}")
                col = self.cf[r.cf_column].to_numpy(dtype=float)
                if np.any(col < 0) or np.any(col > 1) or not np.all(np.isfinite(col)):
                    raise InputError(f"capacity factors of {r.cf_column} must lie in [0, 1]")
        missing = [z for z in self.zones if z not in self.demand.columns]
        if missing:
            raise InconsistentNetwork(f"no demand column for zones {missing}")
        if len(self.demand) != len(self.cf):
            raise InputError("demand and capacity-factor tables differ in length")
        if self.energy_cost_basis not in ("thermal", "electric"):
            raise InputError("energy_cost_basis must be 'thermal' or 'electric'")

    @property
    def hours(self) -> int:
        return len(self.demand)

    def series(self) -> pd.DataFrame:
        """Demand and capacity factors side by side, the clustering input."""
        cols = sorted({r.cf_column for r in self.resources if r.kind == "vre"})
        return pd.concat([self.demand[self.zones].add_prefix("demand_"), self.cf[cols]], axis=1)

    def ptes_energy_cost(self, r: Resource) -> float:
        """Energy cost per thermal MWh."""
        if self.energy_cost_basis == "thermal":
            return r.energy_cost
        d = self.ptes
        return r.energy_cost * d.eta_mg / d.alpha_dis


# ------------------------------------------------------ representative periods


@dataclass(frozen=True)
class RepresentativePeriods:
    rep_weeks: np.ndarray  # calendar week of each period's representative, (K,)
    weights: np.ndarray  # calendar weeks represented, (K,)
    assignment: np.ndarray  # period of each calendar week, (52,)

    def __post_init__(self):
        rep = np.asarray(self.rep_weeks, dtype=int)
        w = np.asarray(self.weights, dtype=int)
        a = np.asarray(self.assignment, dtype=int)
        K = rep.size
        if w.size != K or a.size != WEEKS:
            raise InputError("period arrays have inconsistent sizes")
        if np.any(w < 1) or w.sum() != WEEKS:
            raise InputError("period weights must be >= 1 and sum to 52")
        if np.any((a < 0) | (a >= K)) or not np.array_equal(np.bincount(a, minlength=K), w):
            raise InputError("week assignment does not match the weights")
        if not np.all(a[rep] == np.arange(K)):
            raise InputError("each representative week must belong to its own period")
        for name, arr in (("rep_weeks", rep), ("weights", w), ("assignment", a)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_periods(self) -> int:
        return self.rep_weeks.size

    def hour_index(self, k: int) -> np.ndarray:
        """Calendar hours of representative week ``k``."""
        return self.rep_weeks[k] * WEEK + np.arange(WEEK)

    @classmethod
    def full_year(cls) -> "RepresentativePeriods":
        return cls(np.arange(WEEKS), np.ones(WEEKS, dtype=int), np.arange(WEEKS))


def cluster_weeks(series: pd.DataFrame | np.ndarray, k: int, seed: int = 0, max_retries: int = 5) -> RepresentativePeriods:
    """Pick ``k`` representative weeks by k-means on the weekly profiles.

    Each column is min-max scaled over the year, the first 52 x 168 hours are
    cut into weeks and flattened, and k-means groups them. A period is
    represented by its member week nearest the centroid and weighted by the
    number of members. Periods are ordered by calendar position.
    """
    from sklearn.cluster import KMeans

    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < WEEKS * WEEK:
        raise InputError(f"clustering needs at least {WEEKS * WEEK} hours, got {X.shape[0]}")
    if not 1 <= k <= WEEKS:
        raise InputError("k must lie in [1, 52]")
    X = X[: WEEKS * WEEK]
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    weeks = ((X - lo) / span).reshape(WEEKS, WEEK * X.shape[1])
    for attempt in range(max_retries + 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # duplicate points give a convergence warning
            km = KMeans(n_clusters=k, n_init=10, random_state=seed + attempt).fit(weeks)
        labels = km.labels_
        counts = np.bincount(labels, minlength=k)
        if np.all(counts > 0):
            break
        log.info("k-means left an empty cluster with seed %d, re-seeding", seed + attempt)
    else:
        raise EmptyCluster(f"k-means kept producing empty clusters for k={k}")
    reps = np.empty(k, dtype=int)
    for c in range(k):
        members = np.nonzero(labels == c)[0]
        dist = np.linalg.norm(weeks[members] - km.cluster_centers_[c], axis=1)
        reps[c] = members[np.argmin(dist)]
    order = np.argsort(reps)
    relabel = np.empty(k, dtype=int)
    relabel[order] = np.arange(k)
    return RepresentativePeriods(reps[order], counts[order], relabel[labels])


# ---------------------------------------------------------------- the problem


@dataclass(frozen=True)
class CemOptions:
    trust_radius: float = 0.2  # relative, on PTES capacities
    min_radius: float = 1e-3
    rel_tol: float = 1e-3  # stop when an accepted step improves cost by less than this
    max_iters: int = 30
    excursion_bounds: bool = True
    capacity_floor: float = 0.01  # fraction of peak demand used when PTES starts at zero
    floor_duration: float = 24.0  # h, thermal energy floor relative to the power floor
    lp: SolveOptions = field(default_factory=lambda: SolveOptions(lp_method="simplex"))
    time_limit: float = float("inf")


class _Cols:
    def __init__(self):
        self.n = 0
        self.lo: list[np.ndarray] = []
        self.hi: list[np.ndarray] = []

    def add(self, shape, lo=0.0, hi=INF) -> np.ndarray:
        size = int(np.prod(shape))
        idx = np.arange(self.n, self.n + size).reshape(shape)
        self.n += size
        self.lo.append(np.full(size, lo, dtype=float))
        self.hi.append(np.full(size, hi, dtype=float))
        return idx

    def bounds(self):
        return np.concatenate(self.lo), np.concatenate(self.hi)


@dataclass
class CemProblem:
    system: CemSystem
    periods: RepresentativePeriods
    spec: CapabilitySpec
    options: CemOptions
    base: LpInstance  # everything except PTES capability rows
    cols: dict  # name -> index arrays
    bilinear: bool
    demand: np.ndarray  # (Z, K, T)
    hour_weight: np.ndarray  # (K*T,)

    @property
    def ptes(self) -> list[Resource]:
        return [r for r in self.system.resources if r.technology == "ptes"]

    @property
    def n_hours(self) -> int:
        return self.periods.n_periods * WEEK


def _decay(gamma: float) -> tuple[np.ndarray, float]:
    lam_t = (1.0 - gamma) ** np.arange(1, WEEK + 1)
    return lam_t, float(lam_t[-1])


def build_cem(system: CemSystem, periods: RepresentativePeriods, spec: CapabilitySpec | str,
              options: CemOptions | None = None) -> CemProblem:
    """Assemble the linear part of the capacity-expansion model.

    Capability rows for PTES are added per solve: fixed-capacity rows for
    scoring, linearised rows for the SLP subproblem. ``bilinear`` is False
    only for Model E, where ``w <= W`` is the whole capability constraint.
    """
    spec = CapabilitySpec.parse(spec) if isinstance(spec, str) else spec
    options = options or CemOptions()
    if spec.family == "D2":
        raise UnsupportedSpec("D2 rescales a fixed design and has no capacity-expansion form")
    K, T = periods.n_periods, WEEK
    NH = K * T
    hours = np.concatenate([periods.hour_index(k) for k in range(K)])
    if hours.max() >= system.hours:
        raise InputError("representative weeks run past the end of the input series")
    Z = len(system.zones)
    zid = {z: i for i, z in enumerate(system.zones)}
    demand = system.demand[system.zones].to_numpy(dtype=float)[hours].T.reshape(Z, K, T)
    w_hour = np.repeat(np.asarray(periods.weights, dtype=float), T)
    d = system.ptes
    a_ch = d.alpha_ch * d.eta_mg
    a_dis = d.alpha_dis / d.eta_mg
    lam_t, lam = _decay(d.gamma)

    cols = _Cols()
    c_parts: list[tuple[np.ndarray, np.ndarray]] = []  # (cols, costs)
    ix: dict = {"vre": {}, "li": {}, "ptes": {}}
    for r in system.resources:
        if r.kind == "vre":
            cap = cols.add((1,))
            g = cols.add((NH,))
            ix["vre"][r.name] = {"cap": cap, "gen": g}
            c_parts += [(cap, np.array([r.power_cost])), (g, r.var_cost * w_hour)]
        elif r.technology == "li_ion":
            cap = cols.add((2,))  # power, energy
            ch, dis, e = cols.add((NH,)), cols.add((NH,)), cols.add((NH,))
            ix["li"][r.name] = {"cap": cap, "ch": ch, "dis": dis, "e": e}
            c_parts += [(cap, np.array([r.power_cost, r.energy_cost])), (dis, r.var_cost * w_hour)]
        else:
            cap = cols.add((2,))  # discharge power W, thermal energy E
            ch, dis, e = cols.add((NH,)), cols.add((NH,)), cols.add((NH,))
            S = cols.add((WEEKS,))
            emax = cols.add((K,), -INF, INF)
            emin = cols.add((K,), -INF, INF)
            ix["ptes"][r.name] = {"cap": cap, "ch": ch, "dis": dis, "e": e, "S": S, "emax": emax, "emin": emin}
            c_parts += [(cap, np.array([r.power_cost, system.ptes_energy_cost(r)])), (dis, r.var_cost * w_hour)]
    nse = cols.add((Z, NH))
    c_parts.append((nse.ravel(), np.tile(system.nse_cost * w_hour, Z)))
    flows = {}
    for ln in system.lines:
        flows[ln.name] = cols.add((NH,), -ln.limit_mw, ln.limit_mw)
    n = cols.n
    c = np.zeros(n)
    for idx, cost in c_parts:
        c[idx.ravel()] += cost

    rb = RowBuilder(n)
    h = np.arange(NH)
    t_of = np.tile(np.arange(T), K)
    k_of = np.repeat(np.arange(K), T)
    first = t_of == 0
    prev = np.where(first, h + T - 1, h - 1)  # cyclic predecessor within the period

    # zone balance: supply - withdrawals + nse + net import = demand
    entries = {z: [(h, nse[zid[z]], 1.0)] for z in system.zones}
    for r in system.resources:
        z = r.zone
        if r.kind == "vre":
            entries[z].append((h, ix["vre"][r.name]["gen"], 1.0))
        else:
            blk = ix["li" if r.technology == "li_ion" else "ptes"][r.name]
            entries[z] += [(h, blk["dis"], 1.0), (h, blk["ch"], -1.0)]
    for ln in system.lines:
        entries[ln.to_zone].append((h, flows[ln.name], 1.0))
        entries[ln.from_zone].append((h, flows[ln.name], -1.0))
    for z in system.zones:
        dz = demand[zid[z]].ravel()
        rb.add(f"balance:{z}", NH, entries[z], dz, dz)

    for r in system.resources:
        if r.kind == "vre":
            blk = ix["vre"][r.name]
            cf = system.cf[r.cf_column].to_numpy(dtype=float)[hours]
            rb.add(f"vre:{r.name}", NH, [(h, blk["gen"], 1.0), (h, blk["cap"][0], -cf)], -INF, 0.0)
        elif r.technology == "li_ion":
            blk = ix["li"][r.name]
            P, E = blk["cap"]
            rb.add(f"li_ch:{r.name}", NH, [(h, blk["ch"], 1.0), (h, P, -1.0)], -INF, 0.0)
            rb.add(f"li_dis:{r.name}", NH, [(h, blk["dis"], 1.0), (h, P, -1.0)], -INF, 0.0)
            rb.add(f"li_e:{r.name}", NH, [(h, blk["e"], 1.0), (h, E, -1.0)], -INF, 0.0)
            rb.add(
                f"li_dyn:{r.name}",
                NH,
                [(h, blk["e"], 1.0), (h, blk["e"][prev], -(1.0 - r.leakage)),
                 (h, blk["ch"], -r.efficiency), (h, blk["dis"], 1.0 / r.efficiency)],
                0.0,
                0.0,
            )
        else:
            blk = ix["ptes"][r.name]
            W, E = blk["cap"]
            e, S = blk["e"], blk["S"]
            rb.add(f"ptes_ch:{r.name}", NH, [(h, blk["ch"], 1.0), (h, W, -PTES_RATIO)], -INF, 0.0)
            rb.add(f"ptes_dis:{r.name}", NH, [(h, blk["dis"], 1.0), (h, W, -1.0)], -INF, 0.0)
            rb.add(f"ptes_e:{r.name}", NH, [(h, e, 1.0), (h, E, -1.0)], -INF, 0.0)
            rb.add(f"ptes_S:{r.name}", WEEKS, [(np.arange(WEEKS), S, 1.0), (np.arange(WEEKS), E, -1.0)], -INF, 0.0)
            hi_, h0 = h[~first], h[first]
            rb.add(
                f"ptes_dyn:{r.name}",
                hi_.size,
                [(np.arange(hi_.size), e[hi_], 1.0), (np.arange(hi_.size), e[hi_ - 1], -(1.0 - d.gamma)),
                 (np.arange(hi_.size), blk["ch"][hi_], -a_ch), (np.arange(hi_.size), blk["dis"][hi_], a_dis)],
                0.0,
                0.0,
            )
            kk = np.arange(K)
            rb.add(
                f"ptes_start:{r.name}",
                K,
                [(kk, e[h0], 1.0), (kk, S[periods.rep_weeks], -(1.0 - d.gamma)),
                 (kk, blk["ch"][h0], -a_ch), (kk, blk["dis"][h0], a_dis)],
                0.0,
                0.0,
            )
            # S[j+1] = lam S[j] + e[k, T-1] - lam S[rep(k)]
            j = np.arange(WEEKS)
            kj = periods.assignment
            last = kj * T + T - 1
            rb.add(
                f"ptes_link:{r.name}",
                WEEKS,
                [(j, S[(j + 1) % WEEKS], 1.0), (j, S[j], -lam), (j, e[last], -1.0), (j, S[periods.rep_weeks[kj]], lam)],
                0.0,
                0.0,
            )
            if options.excursion_bounds:
                lt = lam_t[t_of]
                srep = S[periods.rep_weeks[k_of]]
                rb.add(f"ptes_emax:{r.name}", NH,
                       [(h, e, 1.0), (h, srep, -lt), (h, blk["emax"][k_of], -1.0)], -INF, 0.0)
                rb.add(f"ptes_emin:{r.name}", NH,
                       [(h, e, 1.0), (h, srep, -lt), (h, blk["emin"][k_of], -1.0)], 0.0, INF)
                rb.add(f"ptes_top:{r.name}", WEEKS,
                       [(j, S[j], 1.0), (j, blk["emax"][kj], 1.0), (j, E, -1.0)], -INF, 0.0)
                rb.add(f"ptes_bottom:{r.name}", WEEKS,
                       [(j, S[j], lam), (j, blk["emin"][kj], 1.0)], 0.0, INF)
    lo, hi = cols.bounds()
    if not options.excursion_bounds:
        for blk in ix["ptes"].values():
            lo[blk["emax"]] = hi[blk["emax"]] = 0.0
            lo[blk["emin"]] = hi[blk["emin"]] = 0.0
    A = rb.matrix()
    rlo, rhi = rb.bounds()
    base = LpInstance(c=c, A=A, row_lo=rlo, row_hi=rhi, col_lo=lo, col_hi=hi, sense="min")
    ix["nse"] = nse
    ix["flows"] = flows
    ix["rows"] = dict(rb.labels)
    return CemProblem(
        system=system,
        periods=periods,
        spec=spec,
        options=options,
        base=base,
        cols=ix,
        bilinear=spec.family != "E",
        demand=demand,
        hour_weight=w_hour,
    )


# ------------------------------------------------------------------ solutions


@dataclass
class CemSolution:
    spec: str
    capacities: pd.DataFrame
    total_cost: float
    cost_breakdown: dict[str, float]
    x: np.ndarray
    status: Status
    iterations: int = 0
    wall_time: float = 0.0
    history: list[float] = field(default_factory=list)
    radius_history: list[float] = field(default_factory=list)
    max_capability_violation: float = 0.0
    balance_residual: float = 0.0
    notes: list[str] = field(default_factory=list)

    def ptes_capacity(self) -> dict[str, tuple[float, float]]:
        cap = self.capacities[self.capacities.technology == "ptes"]
        return {row.resource: (row.power_mw, row.energy_mwh) for row in cap.itertuples()}


def _capacities_frame(problem: CemProblem, x: np.ndarray) -> pd.DataFrame:
    rows = []
    ix = problem.cols
    for r in problem.system.resources:
        if r.kind == "vre":
            p, e, ch = x[ix["vre"][r.name]["cap"][0]], 0.0, 0.0
        elif r.technology == "li_ion":
            p, e = x[ix["li"][r.name]["cap"]]
            ch = p
        else:
            p, e = x[ix["ptes"][r.name]["cap"]]
            ch = PTES_RATIO * p
        rows.append({"resource": r.name, "zone": r.zone, "technology": r.technology,
                     "power_mw": max(float(p), 0.0), "charge_mw": max(float(ch), 0.0),
                     "energy_mwh": max(float(e), 0.0)})
    return pd.DataFrame(rows)


def _breakdown(problem: CemProblem, x: np.ndarray) -> dict[str, float]:
    c = problem.base.c
    ix = problem.cols
    out: dict[str, float] = {}
    for r in problem.system.resources:
        blk = ix["vre" if r.kind == "vre" else "li" if r.technology == "li_ion" else "ptes"][r.name]
        out[f"invest:{r.technology}"] = out.get(f"invest:{r.technology}", 0.0) + float(c[blk["cap"]] @ x[blk["cap"]])
        var_cols = blk["gen"] if r.kind == "vre" else blk["dis"]
        out["variable"] = out.get("variable", 0.0) + float(c[var_cols] @ x[var_cols])
    nse = ix["nse"].ravel()
    out["nse"] = float(c[nse] @ x[nse])
    return out


def _ptes_links(problem: CemProblem, caps: dict[str, tuple[float, float]]) -> list[CapabilityLink]:
    links = []
    for r in problem.ptes:
        W, E = caps[r.name]
        if W <= 0 or E <= 0:
            continue
        blk = problem.cols["ptes"][r.name]
        links.append(CapabilityLink("charge", blk["ch"], blk["e"], 100.0 / E, PTES_RATIO * W))
        links.append(CapabilityLink("discharge", blk["dis"], blk["e"], 100.0 / E, W))
    return links


def _fixed_session(problem: CemProblem, caps: dict[str, tuple[float, float]]) -> LpSession:
    sess = LpSession(problem.base, problem.options.lp)
    for r in problem.ptes:
        W, E = caps[r.name]
        blk = problem.cols["ptes"][r.name]
        W, E = max(W, 0.0), max(E, 0.0)
        if W <= 0 or E <= 0:
            W = E = 0.0
            for key in ("ch", "dis"):
                sess.set_col_bounds(blk[key], np.zeros(blk[key].size), np.zeros(blk[key].size))
        sess.set_col_bounds(blk["cap"], np.array([W, E]), np.array([W, E]))
    return sess


def evaluate_capacities(problem: CemProblem, caps: dict[str, tuple[float, float]], deadline: float = float("inf"),
                        x_hint: np.ndarray | None = None):
    """Exact cost with PTES capacities fixed; everything else is re-optimised.

    With the PTES capacities fixed the capability rows are linear in stored
    energy (cut loop for concave curves). For Model A, ``x_hint`` (a nearby
    solution) seeds the part-load profile. Returns ``(cost, x, status)``.
    """
    spec = problem.spec
    opts = problem.options.lp
    sess = _fixed_session(problem, caps)
    links = _ptes_links(problem, caps)
    if spec.family == "E" or not links:
        sess.set_time_limit(deadline - time.perf_counter())
        status = sess.solve()
    elif spec.is_linear:
        for link in links:
            m, lo, hi = segment_rows(link, sess.n_cols, spec.segments(link.side))
            sess.add_rows(m, lo, hi)
        sess.set_time_limit(deadline - time.perf_counter())
        status = sess.solve()
    elif spec.family == "B":
        eta, slope = _curve_fns(spec, links)
        loop = CutLoop(sess, links, eta, slope, opts)
        loop.seed(lambda li: _mirror(opts.initial_cut_points, links[li].side))
        status = loop.run(SolveStats(), deadline)
    else:
        p0 = None
        if x_hint is not None:
            p0 = [np.clip(link.power(x_hint) / link.w_max, opts.p_floor, 1.0) for link in links]
        x, status, _, best = part_load_fixed_point(sess, links, spec, opts, SolveStats(), deadline, p0)
        if status != Status.OPTIMAL:
            # only an iterate that meets the true curves has a valid cost
            if best is None:
                return float("inf"), None, status
            x = best[0]
            status = Status.ITERATION_LIMIT
        if x is None:
            return float("inf"), None, status
        return float(problem.base.c @ x), x, status
    if sess.x is None or status not in (Status.OPTIMAL, Status.ITERATION_LIMIT):
        return float("inf"), None, status
    return float(sess.objective), sess.x.copy(), status


def _lines_for(problem: CemProblem, side: str, pct: np.ndarray, p: np.ndarray | None):
    """(slope, intercept) per hour for each line bounding eta(side)."""
    spec = problem.spec
    if spec.is_linear:
        return [(np.full(pct.size, s.slope), np.full(pct.size, s.intercept)) for s in spec.segments(side)]
    pts = [np.full(pct.size, float(q)) for q in _mirror(problem.options.lp.initial_cut_points, side)] + [pct]
    out = []
    for x0 in pts:
        e0 = np.asarray(spec.eta(x0, side, p), dtype=float)
        g0 = np.asarray(spec.slope(x0, side, p), dtype=float)
        out.append((g0, e0 - g0 * x0))
    return out


def _linearized_rows(problem: CemProblem, x0: np.ndarray, caps0: dict[str, tuple[float, float]]):
    """Capability rows with ``W e / E`` linearised at the incumbent.

    For a line ``eta <= m s + q`` with ``s = 100 e / E`` the constraint
    ``w <= r W (m s + q)`` becomes
    ``w <= r [100 m (W0/E0) e - 100 m (W0 e0/E0^2) E + (100 m e0/E0 + q) W]``.
    """
    n = problem.base.n_cols
    mats, los, his = [], [], []
    for r in problem.ptes:
        W0, E0 = caps0[r.name]
        blk = problem.cols["ptes"][r.name]
        Wc, Ec = blk["cap"]
        e0 = x0[blk["e"]]
        pct = np.clip(100.0 * e0 / E0, 0.0, 100.0)
        for side, wcols, ratio in (("charge", blk["ch"], PTES_RATIO), ("discharge", blk["dis"], 1.0)):
            p = None
            if problem.spec.family == "A":
                p = np.clip(x0[wcols] / (ratio * W0), problem.options.lp.p_floor, 1.0)
            m_rows = wcols.size
            rr = np.arange(m_rows)
            for m, q in _lines_for(problem, side, pct, p):
                vals_e = -ratio * 100.0 * m * W0 / E0
                vals_E = ratio * 100.0 * m * W0 * e0 / E0**2
                vals_W = -ratio * (100.0 * m * e0 / E0 + q)
                rows = np.concatenate([rr, rr, rr, rr])
                cc = np.concatenate([wcols, blk["e"], np.full(m_rows, Ec), np.full(m_rows, Wc)])
                vv = np.concatenate([np.ones(m_rows), vals_e, vals_E, vals_W])
                mats.append(sp.csr_matrix((vv, (rows, cc)), shape=(m_rows, n)))
                los.append(np.full(m_rows, -INF))
                his.append(np.zeros(m_rows))
    if not mats:
        return sp.csr_matrix((0, n)), np.zeros(0), np.zeros(0)
    return sp.vstack(mats, format="csr"), np.concatenate(los), np.concatenate(his)


def _caps_from_x(problem: CemProblem, x: np.ndarray) -> dict[str, tuple[float, float]]:
    return {r.name: tuple(float(max(v, 0.0)) for v in x[problem.cols["ptes"][r.name]["cap"]]) for r in problem.ptes}


def _floored(problem: CemProblem, caps):
    peak = float(problem.demand.sum(axis=0).max())
    fw = problem.options.capacity_floor * peak
    d = problem.system.ptes
    fe = fw * problem.options.floor_duration * d.alpha_dis / d.eta_mg
    return {k: (max(W, fw), max(E, fe)) for k, (W, E) in caps.items()}, fw, fe


def _package(problem: CemProblem, x: np.ndarray, cost: float, status: Status, t0: float, **kw) -> CemSolution:
    sol = CemSolution(
        spec=problem.spec.tag,
        capacities=_capacities_frame(problem, x),
        total_cost=cost,
        cost_breakdown=_breakdown(problem, x),
        x=x,
        status=status,
        wall_time=time.perf_counter() - t0,
        **kw,
    )
    rep = validate_cem(problem, sol)
    sol.max_capability_violation = rep["capability"]
    sol.balance_residual = rep["balance"]
    return sol


def solve_cem(problem: CemProblem, initial: list[dict[str, tuple[float, float]]] | None = None) -> CemSolution:
    """Minimise annual cost.

    Model E is one LP. Otherwise: start from the Model E capacities or any
    ``initial`` PTES capacity set (the cheapest wins), then iterate
    linearised subproblems inside a trust region on the PTES capacities. A
    candidate is accepted only if its exact fixed-capacity cost improves, so
    the incumbent always satisfies the true capability constraints. The
    no-PTES design is evaluated too and returned if it is cheaper.
    """
    opts = problem.options
    t0 = time.perf_counter()
    deadline = t0 + opts.time_limit if np.isfinite(opts.time_limit) else float("inf")
    sess = LpSession(problem.base, opts.lp)
    sess.set_time_limit(deadline - t0)
    st = sess.solve()
    if st != Status.OPTIMAL:
        raise InputError(f"the relaxed capacity problem did not solve: {st.value}")
    if not problem.bilinear or not problem.ptes:
        return _package(problem, sess.x.copy(), sess.objective, Status.OPTIMAL, t0, iterations=1,
                        history=[sess.objective])

    # SLP runs from the cheapest start that builds PTES; the no-PTES design is
    # compared at the end because SLP is local and must not finish above a
    # trivially feasible point
    none = {r.name: (0.0, 0.0) for r in problem.ptes}
    starts = [_caps_from_x(problem, sess.x)] + list(initial or [])
    starts = [c for c in starts if any(max(v) > 0 for v in c.values())]
    best = None
    if problem.spec.family == "A" and starts:
        # a Model A evaluation is a whole fixed point: rank the starts on the
        # B:M relaxation and evaluate only the best, seeded with its dispatch
        relaxed = replace(problem, spec=CapabilitySpec.parse("B:M"))
        ranked = [(c, *evaluate_capacities(relaxed, c, deadline)[:2]) for c in starts]
        ranked = [r for r in ranked if r[2] is not None]
        if ranked:
            caps, _, hint = min(ranked, key=lambda r: r[1])
            cost, x, _ = evaluate_capacities(problem, caps, deadline, x_hint=hint)
            if x is not None:
                best = (cost, x, caps)
    else:
        for caps in starts:
            cost, x, status = evaluate_capacities(problem, caps, deadline)
            if x is not None and (best is None or cost < best[0]):
                best = (cost, x, caps)
    # one LP, and the fallback incumbent, so it is not cut short by the deadline
    zero_cost, zero_x, _ = evaluate_capacities(problem, none)
    if best is None:
        if zero_x is None:
            raise InputError("no starting capacities could be evaluated")
        status = Status.TIME_LIMIT if time.perf_counter() >= deadline else Status.OPTIMAL
        return _package(problem, zero_x, zero_cost, status, t0, iterations=0, history=[zero_cost])
    cost0, x0, caps0 = best
    history, radii = [cost0], []
    rho = opts.trust_radius
    status = Status.ITERATION_LIMIT
    it = 0
    for it in range(1, opts.max_iters + 1):
        if time.perf_counter() >= deadline:
            status = Status.TIME_LIMIT
            break
        lin_caps, fw, fe = _floored(problem, caps0)
        sub = LpSession(problem.base, opts.lp)
        m, lo, hi = _linearized_rows(problem, x0, lin_caps)
        sub.add_rows(m, lo, hi)
        for r in problem.ptes:
            W0, E0 = caps0[r.name]
            blk = problem.cols["ptes"][r.name]
            dw, de = rho * max(W0, fw), rho * max(E0, fe)
            sub.set_col_bounds(blk["cap"], np.array([max(W0 - dw, 0.0), max(E0 - de, 0.0)]),
                               np.array([W0 + dw, E0 + de]))
        sub.set_time_limit(deadline - time.perf_counter())
        if sub.solve() != Status.OPTIMAL:
            rho /= 2
            radii.append(rho)
            if rho < opts.min_radius:
                status = Status.OPTIMAL
                break
            continue
        cand = _caps_from_x(problem, sub.x)
        cost1, x1, st1 = evaluate_capacities(problem, cand, deadline, x_hint=x0)
        if x1 is not None and cost1 < cost0:
            gain = (cost0 - cost1) / max(abs(cost0), 1.0)
            at_edge = any(
                abs(cand[r.name][k] - caps0[r.name][k]) > 0.9 * rho * max(caps0[r.name][k], floor)
                for r in problem.ptes
                for k, floor in ((0, fw), (1, fe))
            )
            cost0, x0, caps0 = cost1, x1, cand
            history.append(cost0)
            if gain < opts.rel_tol:
                status = Status.OPTIMAL
                break
            if at_edge:
                rho = min(2 * rho, 0.8)
        else:
            rho /= 2
            if rho < opts.min_radius:
                status = Status.OPTIMAL
                break
        radii.append(rho)
    if zero_x is not None and zero_cost < cost0:
        history.append(zero_cost)
        return _package(problem, zero_x, zero_cost, status, t0, iterations=it, history=history,
                        radius_history=radii, notes=["no-PTES design beat the SLP incumbent"])
    return _package(problem, x0, cost0, status, t0, iterations=it, history=history, radius_history=radii)


def solve_cem_specs(system: CemSystem, periods: RepresentativePeriods, specs, options: CemOptions | None = None,
                    warm_start: bool = True, return_problems: bool = False):
    """Solve several models; tighter models go first so that, with
    ``warm_start``, each looser model may start from the capacities of every
    solved model it dominates (verified on a grid)."""
    parsed = [CapabilitySpec.parse(s) if isinstance(s, str) else s for s in specs]

    def looseness(s: CapabilitySpec) -> float:
        grid = np.linspace(0.0, 100.0, 201)
        return float(np.mean(s.eta(grid, "charge", 1.0 if s.family == "A" else None)))

    order = sorted(parsed, key=looseness)
    out: dict[str, CemSolution] = {}
    probs: dict[str, CemProblem] = {}
    for s in order:
        inits = []
        if warm_start:
            for tag, sol in out.items():
                try:
                    check_dominance(s, CapabilitySpec.parse(tag))
                except CapabilityDominanceError:
                    continue
                inits.append(sol.ptes_capacity())
        prob = build_cem(system, periods, s, options)
        probs[s.tag] = prob
        out[s.tag] = solve_cem(prob, inits)
        log.info("CEM %s: cost %.6g (%s)", s.tag, out[s.tag].total_cost, out[s.tag].status.value)
    sols = {s.tag: out[s.tag] for s in parsed}
    if return_problems:
        return sols, {s.tag: probs[s.tag] for s in parsed}
    return sols


# ------------------------------------------------------------------ checking


def validate_cem(problem: CemProblem, sol: CemSolution) -> dict[str, float]:
    """Balance residual (fraction of peak demand) and the largest true
    capability violation (fraction of nameplate) of a solution."""
    x = sol.x
    A = problem.base.A
    resid = 0.0
    peak = float(problem.demand.sum(axis=0).max())
    for z in problem.system.zones:
        rows = problem.cols["rows"][f"balance:{z}"]
        lhs = A[rows] @ x
        resid = max(resid, float(np.max(np.abs(lhs - problem.base.row_lo[rows]))) / peak)
    caps = _caps_from_x(problem, x)
    links = _ptes_links(problem, caps)
    viol = 0.0
    spec = problem.spec
    if links and spec.family == "A":
        viol = part_load_violation(spec, links, x, problem.options.lp.p_floor)
    elif links:
        for link in links:
            eta = spec.eta(link.pct(x), link.side)
            viol = max(viol, float(np.max(link.power(x) / link.w_max - eta, initial=0.0)))
    return {"balance": resid, "capability": viol}


def calendar_schedule(problem: CemProblem, sol: CemSolution, resource: str):
    """PTES dispatch and SoC over the 52 calendar weeks (52 x 168 hours).

    Week ``j`` repeats the dispatch of its period, with stored energy
    ``(1-g)^(t+1) S[j] + d[k,t]``. Returns a frame with w_ch, w_dis (MW),
    stored energy (MWh) and SoC fraction.
    """
    x = sol.x
    blk = problem.cols["ptes"][resource]
    T = WEEK
    K = problem.periods.n_periods
    lam_t, _ = _decay(problem.system.ptes.gamma)
    e = x[blk["e"]].reshape(K, T)
    S = x[blk["S"]]
    zero_start = e - lam_t[None, :] * S[problem.periods.rep_weeks][:, None]
    ch = x[blk["ch"]].reshape(K, T)
    dis = x[blk["dis"]].reshape(K, T)
    a = problem.periods.assignment
    energy = lam_t[None, :] * S[:, None] + zero_start[a]
    E = float(x[blk["cap"][1]])
    return pd.DataFrame({
        "week": np.repeat(np.arange(WEEKS), T),
        "period": np.repeat(a, T),
        "w_ch": ch[a].ravel(),
        "w_dis": dis[a].ravel(),
        "energy_mwh": energy.ravel(),
        "soc": energy.ravel() / E if E > 0 else np.zeros(WEEKS * T),
    })


def chain_boundary_states(problem: CemProblem, sol: CemSolution, resource: str) -> tuple[np.ndarray, np.ndarray]:
    """Boundary states chained from S[0] with the per-period net changes,
    next to the solved ones."""
    x = sol.x
    blk = problem.cols["ptes"][resource]
    K, T = problem.periods.n_periods, WEEK
    lam_t, lam = _decay(problem.system.ptes.gamma)
    e = x[blk["e"]].reshape(K, T)
    S = x[blk["S"]]
    net = e[:, -1] - lam * S[problem.periods.rep_weeks]
    chained = np.empty(WEEKS + 1)
    chained[0] = S[0]
    for j in range(WEEKS):
        chained[j + 1] = lam * chained[j] + net[problem.periods.assignment[j]]
    return chained, np.append(S, S[0])


def ptes_soc_frame(problem: CemProblem, sol: CemSolution) -> pd.DataFrame:
    """SoC (percent) over the representative weeks with their weights."""
    rows = []
    K = problem.periods.n_periods
    for r in problem.ptes:
        blk = problem.cols["ptes"][r.name]
        E = float(sol.x[blk["cap"][1]])
        e = sol.x[blk["e"]].reshape(K, WEEK)
        soc = 100.0 * e / E if E > 0 else np.zeros_like(e)
        for k in range(K):
            rows.append(pd.DataFrame({
                "spec": sol.spec, "resource": r.name, "zone": r.zone, "period": k,
                "rep_week": int(problem.periods.rep_weeks[k]), "weight": int(problem.periods.weights[k]),
                "hour": np.arange(WEEK), "soc_pct": soc[k],
            }))
    return pd.concat(rows, ignore_index=True) if rows else pd.DataFrame()


def mean_ptes_soc(problem: CemProblem, sol: CemSolution, resource: str | None = None) -> float:
    """Weight-averaged SoC (percent) over the representative weeks.

    Without ``resource`` the system value is stored energy over installed
    energy capacity; resources with no energy capacity are left out.
    """
    df = ptes_soc_frame(problem, sol)
    if resource is not None:
        df = df[df.resource == resource]
        return float(np.average(df.soc_pct, weights=df.weight)) if not df.empty else float("nan")
    energy = {r.name: float(sol.x[problem.cols["ptes"][r.name]["cap"][1]]) for r in problem.ptes}
    cap = df.resource.map(energy).to_numpy()
    keep = cap > 1e-6
    if not keep.any():
        return float("nan")
    return float(np.average(df.soc_pct[keep], weights=df.weight[keep] * cap[keep]))


def ptes_duration_ecdf(problem: CemProblem, sol: CemSolution, resource: str) -> DurationEcdf:
    """FIFO storage-duration ECDF over the reconstructed calendar year."""
    cal = calendar_schedule(problem, sol, resource)
    blk = problem.cols["ptes"][resource]
    W, E = sol.x[blk["cap"]]
    d = replace(problem.system.ptes, w_ch_max=max(PTES_RATIO * W, 1e-9), w_dis_max=max(W, 1e-9),
                energy_capacity=max(E, 1e-9))

    class _Sched:
        w_ch = cal.w_ch.to_numpy()
        w_dis = cal.w_dis.to_numpy()
        soc = cal.soc.to_numpy()

    return storage_duration_ecdf(_Sched, d, cyclic=True, tol=1e-5)


# ------------------------------------------------------------------- reports


def cost_deltas(costs: dict[str, float], baseline: str | None = None) -> pd.DataFrame:
    """Total cost per model and its change relative to ``baseline`` (percent)."""
    if not costs:
        return pd.DataFrame(columns=["spec", "total_cost", "delta_pct"])
    base = baseline if baseline in costs else ("E" if "E" in costs else next(iter(costs)))
    ref = costs[base]
    return pd.DataFrame({
        "spec": list(costs),
        "total_cost": [costs[k] for k in costs],
        "delta_pct": [100.0 * (costs[k] - ref) / ref for k in costs],
    })


def cem_report(solutions: dict[str, CemSolution], problems: dict[str, CemProblem] | None = None,
               baseline: str = "E") -> dict[str, pd.DataFrame]:
    """Capacity table, cost deltas, SoC trajectories and duration ECDFs."""
    caps = pd.concat([s.capacities.assign(spec=tag) for tag, s in solutions.items()], ignore_index=True) \
        if solutions else pd.DataFrame()
    out = {
        "capacities": caps,
        "costs": cost_deltas({k: s.total_cost for k, s in solutions.items()}, baseline),
    }
    if problems:
        soc, ecdf = [], []
        for tag, sol in solutions.items():
            prob = problems[tag]
            soc.append(ptes_soc_frame(prob, sol).assign(spec=tag))
            for r in prob.ptes:
                W, E = sol.x[prob.cols["ptes"][r.name]["cap"]]
                if W <= 1e-9 or E <= 1e-9:
                    continue
                frame = ptes_duration_ecdf(prob, sol, r.name).to_frame()
                ecdf.append(frame.assign(spec=tag, resource=r.name))
        out["soc"] = pd.concat(soc, ignore_index=True) if soc else pd.DataFrame()
        out["ecdf"] = pd.concat(ecdf, ignore_index=True) if ecdf else pd.DataFrame()
    return out


# --------------------------------------------------------------- toy system


def toy_system(seed: int = 0, hours: int = 8760) -> CemSystem:
    """Synthetic three-zone system (MA, CT, ME) with solar, wind, Li-ion and PTES.

    Wind is priced high enough that solar carries most of the energy, so
    storage mostly shifts solar surplus within and across days.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(hours)
    day = t % 24
    doy = t / 24.0
    season = np.cos(2 * np.pi * (doy - 200) / 365)  # +1 mid-July
    winter = np.cos(2 * np.pi * (doy - 15) / 365)
    shape = 0.8 + 0.25 * np.exp(-((day - 18) ** 2) / 8) + 0.1 * np.exp(-((day - 9) ** 2) / 6)
    zones = ["MA", "CT", "ME"]
    base = {"MA": 100.0, "CT": 60.0, "ME": 25.0}
    demand = pd.DataFrame({
        z: base[z] * shape * (1 + 0.05 * np.clip(season, 0, None) + 0.03 * np.clip(winter, 0, None))
        * (1 + 0.03 * rng.standard_normal(hours))
        for z in zones
    })

    def ar1(phi, sigma):
        x = np.zeros(hours)
        eps = rng.normal(0.0, sigma, hours)
        for i in range(1, hours):
            x[i] = phi * x[i - 1] + eps[i]
        return x

    elev = np.clip(np.sin(np.pi * (day - 6) / 12), 0, None)
    cf = {}
    for z, lat in zip(zones, (0.0, 0.03, -0.05)):
        clouds = np.clip(0.75 + ar1(0.97, 0.05), 0.1, 1.0)
        cf[f"solar_{z}"] = np.clip(elev * (0.75 + 0.2 * season + lat) * clouds, 0, 1)
        wind_base = 0.36 + 0.03 * winter + (0.05 if z == "ME" else 0.0)
        cf[f"wind_{z}"] = np.clip(wind_base + ar1(0.985, 0.04), 0, 1)
    cf = pd.DataFrame(cf)
    resources = []
    for z in zones:
        resources += [
            Resource(f"solar_{z}", "solar", z, power_cost=45_000.0, cf_column=f"solar_{z}"),
            Resource(f"wind_{z}", "wind", z, power_cost=200_000.0, cf_column=f"wind_{z}"),
            Resource(f"li_{z}", "li_ion", z, power_cost=25_000.0, energy_cost=20_000.0, var_cost=0.5),
            Resource(f"ptes_{z}", "ptes", z, power_cost=55_000.0, energy_cost=3_000.0, var_cost=0.5),
        ]
    lines = [Line("MA_CT", "MA", "CT", 40.0), Line("MA_ME", "MA", "ME", 25.0)]
    return CemSystem(zones=zones, lines=lines, resources=resources, demand=demand, cf=cf)


# -------------------------------------------------------------------- file IO


def save_system(system: CemSystem, directory: str | Path) -> Path:
    """Write ``system.yaml``, ``demand.csv`` and ``cf.csv`` to ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    d = system.ptes
    doc = {
        "zones": system.zones,
        "lines": [ln.__dict__ for ln in system.lines],
        "resources": [{k: v for k, v in r.__dict__.items()} for r in system.resources],
        "ptes": {"alpha_ch": d.alpha_ch, "alpha_dis": d.alpha_dis, "eta_mg": d.eta_mg, "gamma": d.gamma},
        "nse_cost": system.nse_cost,
        "energy_cost_basis": system.energy_cost_basis,
        "demand_csv": "demand.csv",
        "cf_csv": "cf.csv",
    }
    (out / "system.yaml").write_text(yaml.safe_dump(doc, sort_keys=False))
    system.demand.to_csv(out / "demand.csv", index_label="hour")
    system.cf.to_csv(out / "cf.csv", index_label="hour")
    return out / "system.yaml"


def load_system(path: str | Path) -> CemSystem:
    """Read a system definition (YAML or JSON) with its demand and cf CSVs."""
    path = Path(path)
    text = path.read_text()
    doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    try:
        demand = pd.read_csv(path.parent / doc["demand_csv"], index_col=0)
        cf = pd.read_csv(path.parent / doc["cf_csv"], index_col=0)
        lines = [Line(**ln) for ln in doc.get("lines", [])]
        resources = [Resource(**r) for r in doc["resources"]]
        p = doc.get("ptes", {})
        design = replace(reference_design(), **{k: float(v) for k, v in p.items()})
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed system file ({exc})") from exc
    return CemSystem(
        zones=list(doc["zones"]),
        lines=lines,
        resources=resources,
        demand=demand,
        cf=cf,
        ptes=design,
        nse_cost=float(doc.get("nse_cost", 9000.0)),
        energy_cost_basis=doc.get("energy_cost_basis", "thermal"),
    )
