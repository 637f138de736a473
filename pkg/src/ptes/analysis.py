"""Comparison metrics: RMSD on SoC and power, figure of merit, FIFO storage
duration ECDF and trade-off aggregation."""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .design import PtesDesign
from .errors import LedgerUnderflow, LengthMismatch

__all__ = [
    "TradeoffRecord",
    "DurationEcdf",
    "rmsd_soc",
    "rmsd_w",
    "fom",
    "storage_duration_ecdf",
    "fifo_ledger",
    "tradeoff_records",
    "tradeoff_table",
]


def _series(sol, name):
    return np.asarray(getattr(sol, name) if hasattr(sol, name) else sol[name], dtype=float)


def _check(a, b):
    if a.shape != b.shape:
        raise LengthMismatch(f"horizons differ: {a.shape[0]} vs {b.shape[0]}")


def rmsd_soc(sol, ref) -> float:
    """RMS SoC deviation in percentage points. SoC is taken as a fraction."""
    a, b = 100.0 * _series(sol, "soc"), 100.0 * _series(ref, "soc")
    _check(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def rmsd_w(sol, ref, design: PtesDesign) -> float:
    """RMS power deviation in percent of nameplate.

    Charge and discharge deviations are added inside the square each hour.
    """
    ch, ch_ref = _series(sol, "w_ch"), _series(ref, "w_ch")
    dis, dis_ref = _series(sol, "w_dis"), _series(ref, "w_dis")
    _check(ch, ch_ref)
    _check(dis, dis_ref)
    _check(ch, dis)
    term = 100.0 * (ch - ch_ref) / design.w_ch_max + 100.0 * (dis - dis_ref) / design.w_dis_max
    return float(np.sqrt(np.mean(term**2)))


def fom(rmsd_soc: float, rmsd_w: float, time_ratio: float, speed_weight: float = 1.0) -> float:
    """Inverse distance from the origin in (SoC error, power error, time) space.

    RMSDs come in percent; ``speed_weight`` scales the time axis (10 for the
    speed-favouring variant).
    """
    if rmsd_soc < 0 or rmsd_w < 0:
        raise ValueError("RMSD values must be non-negative")
    if time_ratio <= 0:
        raise ValueError("time_ratio must be positive")
    return float(1.0 / np.sqrt((rmsd_soc / 100.0) ** 2 + (rmsd_w / 100.0) ** 2 + (speed_weight * time_ratio) ** 2))


@dataclass(frozen=True)
class DurationEcdf:
    durations: np.ndarray  # hours, non-decreasing
    fractions: np.ndarray  # cumulative share of discharged energy
    total_energy: float  # thermal kWh discharged
    ledger_out: float  # thermal kWh taken from the ledger

    def __len__(self) -> int:
        return self.durations.size

    def mean_duration(self) -> float:
        if self.durations.size == 0:
            return float("nan")
        w = np.diff(np.concatenate([[0.0], self.fractions]))
        return float(np.sum(w * self.durations))

    def quantile(self, q: float) -> float:
        k = int(np.searchsorted(self.fractions, q - 1e-12))
        return float(self.durations[min(k, self.durations.size - 1)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"duration_h": self.durations, "cumulative_fraction": self.fractions})


def fifo_ledger(
    charge: np.ndarray,
    discharge: np.ndarray,
    gamma: float,
    initial: float = 0.0,
    tol: float = 1e-6,
    warmup: bool = False,
) -> tuple[np.ndarray, np.ndarray, float]:
    """FIFO ledger over thermal energy parcels.

    Each hour: decay every parcel by ``1 - gamma``, append the charge parcel,
    then take ``discharge[h]`` from the oldest parcels. Returns the durations
    and energies of the consumed pieces plus the total energy taken.

    ``initial`` is stored energy present before hour 0, treated as one parcel
    charged at hour 0. With ``warmup`` the schedule is run once to settle the
    carried-over parcels, and the second pass is recorded (cyclic schedules).
    """
    charge = np.asarray(charge, dtype=float)
    discharge = np.asarray(discharge, dtype=float)
    H = charge.size
    if discharge.size != H:
        raise LengthMismatch("charge and discharge lengths differ")
    ledger: deque[list[float]] = deque()  # [birth_hour, energy]
    if initial > 0:
        ledger.append([0.0, float(initial)])
    passes = 2 if warmup else 1
    durations, energies = [], []
    taken = 0.0
    for k in range(passes):
        offset = k * H
        record = k == passes - 1
        for h in range(H):
            now = offset + h
            if gamma:
                for parcel in ledger:
                    parcel[1] *= 1.0 - gamma
            if charge[h] > 0:
                ledger.append([float(now), float(charge[h])])
            need = float(discharge[h])
            while need > 0 and ledger:
                birth, e = ledger[0]
                use = min(e, need)
                if record and use > 0:
                    durations.append(now - birth)
                    energies.append(use)
                    taken += use
                need -= use
                if use >= e:
                    ledger.popleft()
                else:
                    ledger[0][1] = e - use
            if need > tol:
                raise LedgerUnderflow(f"hour {h}: discharge exceeds stored energy by {need:.3g} kWh")
    return np.asarray(durations, dtype=float), np.asarray(energies, dtype=float), taken


def storage_duration_ecdf(solution, design: PtesDesign, cyclic: bool = True, tol: float = 1e-6) -> DurationEcdf:
    """Energy-weighted ECDF of storage residence time, first-in first-out.

    The ledger is in thermal kWh: charge parcels are ``alpha_ch * eta_mg * w_ch``
    and discharge draws ``alpha_dis * w_dis / eta_mg``. For a cyclic schedule
    the energy held at the start is aged by a warm-up pass over the horizon.
    """
    d = design
    w_ch, w_dis = _series(solution, "w_ch"), _series(solution, "w_dis")
    charge = d.alpha_ch * d.eta_mg * w_ch
    discharge = d.alpha_dis * w_dis / d.eta_mg
    soc = _series(solution, "soc")
    if cyclic:
        start = float(soc[-1]) * d.energy_capacity
    else:
        # energy held before hour 0, recovered from the hour-0 balance
        start = (float(soc[0]) * d.energy_capacity - charge[0] + discharge[0]) / (1.0 - d.gamma)
    tol_kwh = tol * max(d.energy_capacity, 1.0)
    dur, en, taken = fifo_ledger(charge, discharge, d.gamma, initial=max(start, 0.0), tol=tol_kwh, warmup=cyclic)
    order = np.argsort(dur, kind="stable")
    dur, en = dur[order], en[order]
    if en.size:
        # merge equal durations into one step
        uniq, inv = np.unique(dur, return_inverse=True)
        mass = np.bincount(inv, weights=en)
        frac = np.cumsum(mass) / mass.sum()
        frac[-1] = 1.0
    else:
        uniq, frac = np.zeros(0), np.zeros(0)
    return DurationEcdf(uniq, frac, float(discharge.sum()), taken)


@dataclass
class TradeoffRecord:
    model: str
    dataset: str
    run: int
    rmsd_soc: float
    rmsd_w: float
    time_ratio: float
    fom_equal: float
    fom_speed: float
    wall_time: float = float("nan")
    objective: float = float("nan")


def tradeoff_records(
    solutions: dict[str, object],
    wall_times: dict[str, list[float]],
    design: PtesDesign,
    dataset: str,
    reference: str = "A",
    speed_weight: float = 10.0,
) -> list[TradeoffRecord]:
    """One record per (model, run). Time ratios use the median reference time."""
    ref = solutions[reference]
    t_ref = float(np.median(wall_times[reference]))
    out = []
    for tag, sol in solutions.items():
        rs = rmsd_soc(sol, ref)
        rw = rmsd_w(sol, ref, design)
        for k, t in enumerate(wall_times[tag]):
            tr = max(t, 1e-12) / t_ref
            out.append(
                TradeoffRecord(
                    model=tag,
                    dataset=dataset,
                    run=k,
                    rmsd_soc=rs,
                    rmsd_w=rw,
                    time_ratio=tr,
                    fom_equal=fom(rs, rw, tr),
                    fom_speed=fom(rs, rw, tr, speed_weight),
                    wall_time=t,
                    objective=float(getattr(sol, "objective", np.nan)),
                )
            )
    return out


def tradeoff_table(records) -> pd.DataFrame:
    """Per-model mean and range of each metric plus the covariance of
    (time_ratio, rmsd_soc) and (time_ratio, rmsd_w)."""
    df = pd.DataFrame([asdict(r) if isinstance(r, TradeoffRecord) else dict(r) for r in records])
    rows = []
    for model, g in df.groupby("model", sort=False):
        row = {"model": model, "n": len(g)}
        for col in ("rmsd_soc", "rmsd_w", "time_ratio", "fom_equal", "fom_speed"):
            row[f"{col}_mean"] = g[col].mean()
            row[f"{col}_min"] = g[col].min()
            row[f"{col}_max"] = g[col].max()
        for col in ("rmsd_soc", "rmsd_w"):
            cov = np.cov(g[["time_ratio", col]].to_numpy().T, ddof=0) if len(g) > 1 else np.zeros((2, 2))
            row[f"cov_t_t_{col}"] = cov[0, 0]
            row[f"cov_t_{col}"] = cov[0, 1]
            row[f"cov_{col}_{col}"] = cov[1, 1]
        rows.append(row)
    return pd.DataFrame(rows)
