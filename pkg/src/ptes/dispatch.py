"""Price-taker dispatch problem: variables, SoC dynamics, capability rows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .capability import CapabilitySpec
from .cutting import CapabilityLink, segment_rows
from .design import PtesDesign, rescale_design_d2
from .errors import InputError, LengthMismatch, UnsupportedSpec
from .lp import LpInstance, RowBuilder, SolveStats

KW_TO_MW = 1e-3


@dataclass(frozen=True)
class PriceSeries:
    label: str
    prices: np.ndarray  # $/MWh, hourly
    filled: int = 0  # hours filled by interpolation at load time

    def __post_init__(self):
        arr = np.asarray(self.prices, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise InputError("a price series needs at least two hourly values")
        if not np.all(np.isfinite(arr)):
            raise InputError(f"{self.label}: prices must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "prices", arr)

    def __len__(self) -> int:
        return self.prices.size


@dataclass
class DispatchProblem:
    """Built problem. ``lp`` holds the linear core plus any linear capability
    rows; the concave families (A, B) get their capability rows from the
    solver's cut loop.
    """

    design: PtesDesign  # effective design (D2-rescaled when spec is D2)
    nominal_design: PtesDesign
    spec: CapabilitySpec
    prices: PriceSeries
    initial_soc: float | None
    lp: LpInstance
    row_counts: dict[str, int]
    links: list[CapabilityLink]

    @property
    def horizon(self) -> int:
        return len(self.prices)

    @property
    def is_linear(self) -> bool:
        return self.spec.is_linear

    @property
    def part_load_coupled(self) -> bool:
        return self.spec.part_load_coupled

    @property
    def n_box(self) -> int:
        return 2 * self.horizon

    def cols(self, name: str) -> slice:
        H = self.horizon
        return {"w_ch": slice(0, H), "w_dis": slice(H, 2 * H), "soc": slice(2 * H, 3 * H)}[name]


@dataclass
class DispatchSolution:
    tag: str
    w_ch: np.ndarray  # kW
    w_dis: np.ndarray  # kW
    soc: np.ndarray  # fraction
    objective: float  # $
    stats: SolveStats = field(default_factory=SolveStats)
    p_ch: np.ndarray | None = None
    p_dis: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.w_ch.size

    @property
    def soc_pct(self) -> np.ndarray:
        return 100.0 * self.soc

    @classmethod
    def from_vector(cls, problem: DispatchProblem, x: np.ndarray, stats: SolveStats | None = None, **kw):
        w_ch = np.clip(x[problem.cols("w_ch")], 0.0, None)
        w_dis = np.clip(x[problem.cols("w_dis")], 0.0, None)
        soc = x[problem.cols("soc")].copy()
        return cls(
            tag=problem.spec.tag,
            w_ch=w_ch,
            w_dis=w_dis,
            soc=soc,
            objective=profit_arrays(w_ch, w_dis, problem.prices.prices),
            stats=stats or SolveStats(),
            **kw,
        )


def soc_step(soc_prev: float, w_ch: float, w_dis: float, design: PtesDesign) -> float:
    """One-hour SoC update with leakage. No clamping: bounds belong to the optimizer."""
    d = design
    delta = (d.alpha_ch * w_ch * d.eta_mg - d.alpha_dis * w_dis / d.eta_mg) / d.energy_capacity
    return (1.0 - d.gamma) * soc_prev + delta


def effective_design(design: PtesDesign, spec: CapabilitySpec) -> PtesDesign:
    if spec.family == "D2":
        return rescale_design_d2(design, CapabilitySpec.parse("B:M", spec.coeffs))
    return design


def capability_links(problem_design: PtesDesign, H: int) -> list[CapabilityLink]:
    soc_cols = np.arange(2 * H, 3 * H)
    return [
        CapabilityLink("charge", np.arange(0, H), soc_cols, 100.0, problem_design.w_ch_max),
        CapabilityLink("discharge", np.arange(H, 2 * H), soc_cols, 100.0, problem_design.w_dis_max),
    ]


def core_rows(design: PtesDesign, H: int) -> RowBuilder:
    """SoC balance for hours 2..H and the cyclic closure for hour 1."""
    d = design
    n = 3 * H
    rb = RowBuilder(n)
    k_ch = -d.alpha_ch * d.eta_mg / d.energy_capacity
    k_dis = d.alpha_dis / (d.eta_mg * d.energy_capacity)
    decay = -(1.0 - d.gamma)
    h = np.arange(1, H)
    r = np.arange(H - 1)
    rb.add(
        "balance",
        H - 1,
        [(r, 2 * H + h, 1.0), (r, 2 * H + h - 1, decay), (r, h, k_ch), (r, H + h, k_dis)],
        0.0,
        0.0,
    )
    rb.add(
        "cyclic",
        1,
        [(0, 2 * H, 1.0), (0, 3 * H - 1, decay), (0, 0, k_ch), (0, H, k_dis)],
        0.0,
        0.0,
    )
    return rb


def build_problem(
    design: PtesDesign,
    spec: CapabilitySpec,
    prices: PriceSeries,
    initial_soc: float | None = None,
) -> DispatchProblem:
    """Assemble the profit-maximising dispatch problem for one capability model.

    SoC is a fraction; the state before hour 1 equals the end-of-horizon SoC
    (cyclic closure). ``initial_soc`` pins that shared state; ``None`` leaves
    it free in [0, 1].
    """
    if spec.family == "C" and spec.n_segments < 1:
        raise UnsupportedSpec("malformed Model C spec")
    H = len(prices)
    eff = effective_design(design, spec)
    n = 3 * H
    c = np.concatenate([-prices.prices * KW_TO_MW, prices.prices * KW_TO_MW, np.zeros(H)])
    col_lo = np.zeros(n)
    col_hi = np.concatenate([np.full(H, eff.w_ch_max), np.full(H, eff.w_dis_max), np.ones(H)])
    if initial_soc is not None:
        if not 0 <= initial_soc <= 1:
            raise InputError("initial_soc must lie in [0, 1]")
        col_lo[3 * H - 1] = col_hi[3 * H - 1] = initial_soc
    rb = core_rows(eff, H)
    A = rb.matrix()
    lo, hi = rb.bounds()
    counts = {"balance": H - 1, "cyclic": 1, "capability": 0}
    links = capability_links(eff, H)
    if spec.is_linear:
        mats, los, his = [A], [lo], [hi]
        for link in links:
            m, l, u = segment_rows(link, n, spec.segments(link.side))
            mats.append(m)
            los.append(l)
            his.append(u)
            counts["capability"] += m.shape[0]
        A = sp.vstack(mats, format="csr")
        lo = np.concatenate(los)
        hi = np.concatenate(his)
    lp = LpInstance(c=c, A=A, row_lo=lo, row_hi=hi, col_lo=col_lo, col_hi=col_hi, sense="max")
    return DispatchProblem(
        design=eff,
        nominal_design=design,
        spec=spec,
        prices=prices,
        initial_soc=initial_soc,
        lp=lp,
        row_counts=counts,
        links=links,
    )


def profit_arrays(w_ch, w_dis, prices) -> float:
    w_ch, w_dis, prices = (np.asarray(a, dtype=float) for a in (w_ch, w_dis, prices))
    if not (w_ch.shape == w_dis.shape == prices.shape):
        raise LengthMismatch("power and price series must have equal length")
    return float(np.sum((w_dis - w_ch) * prices) * KW_TO_MW)


def profit(solution: DispatchSolution, prices: PriceSeries | np.ndarray) -> float:
    """Arbitrage profit in dollars (kW times $/MWh times 1e-3)."""
    p = prices.prices if isinstance(prices, PriceSeries) else prices
    return profit_arrays(solution.w_ch, solution.w_dis, p)


@dataclass
class ValidationReport:
    spec: str
    max_violation: dict[str, float]
    simultaneity: float
    cyclic_residual: float
    profit: float
    tol: float

    @property
    def feasible(self) -> bool:
        return all(v <= self.tol for v in self.max_violation.values())

    @property
    def capability_violation(self) -> float:
        return max(self.max_violation["capability_ch"], self.max_violation["capability_dis"])


def part_load(w: np.ndarray, w_max: float, floor: float = 0.3) -> np.ndarray:
    """Part-load profile used for Model A; idle hours sit at ``floor``."""
    return np.clip(np.asarray(w) / w_max, floor, 1.0)


def validate_solution(
    problem: DispatchProblem,
    solution: DispatchSolution,
    tol: float = 1e-6,
    spec: CapabilitySpec | None = None,
    p_floor: float = 0.3,
) -> ValidationReport:
    """Re-check a solution against the true (nonlinear) constraints of ``spec``.

    Capability violations are fractions of nameplate; balance violations are
    in SoC fraction. Nothing is fixed up, only reported.
    """
    H = problem.horizon
    if solution.horizon != H:
        raise LengthMismatch(f"solution has {solution.horizon} hours, problem has {H}")
    spec = spec or problem.spec
    d = effective_design(problem.nominal_design, spec)
    w_ch, w_dis, soc = solution.w_ch, solution.w_dis, solution.soc
    viol = {}
    viol["power_bounds"] = float(
        max(
            np.max(np.maximum(-w_ch, w_ch - d.w_ch_max)) / d.w_ch_max,
            np.max(np.maximum(-w_dis, w_dis - d.w_dis_max)) / d.w_dis_max,
            0.0,
        )
    )
    viol["soc_bounds"] = float(max(np.max(np.maximum(-soc, soc - 1.0)), 0.0))
    prev = np.roll(soc, 1)
    expected = np.array([soc_step(prev[h], w_ch[h], w_dis[h], d) for h in range(H)])
    resid = np.abs(soc - expected)
    viol["balance"] = float(resid[1:].max()) if H > 1 else 0.0
    cyclic = float(resid[0])
    viol["cyclic"] = cyclic
    pct = np.clip(100.0 * soc, 0.0, 100.0)
    for side, w, wm, key in (("charge", w_ch, d.w_ch_max, "capability_ch"), ("discharge", w_dis, d.w_dis_max, "capability_dis")):
        if spec.family == "A":
            eta = spec.eta(pct, side, part_load(w, wm, p_floor))
        else:
            eta = spec.eta(pct, side)
        viol[key] = float(max(np.max(w / wm - eta), 0.0))
    simult = float(np.max(np.minimum(w_ch, w_dis)))
    return ValidationReport(
        spec=spec.tag,
        max_violation=viol,
        simultaneity=simult,
        cyclic_residual=cyclic,
        profit=profit_arrays(w_ch, w_dis, problem.prices.prices),
        tol=tol,
    )


def simultaneity_ok(solution: DispatchSolution, design: PtesDesign, rel: float = 1e-4) -> bool:
    return float(np.max(np.minimum(solution.w_ch, solution.w_dis))) <= rel * min(design.w_ch_max, design.w_dis_max)
