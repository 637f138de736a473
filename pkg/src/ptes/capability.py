"""Charging/discharging capability functions for every model family.

All SoC arguments are in percent [0, 100]; ``p`` is the part-load fraction.
Capabilities are fractions of nameplate power in [0, 1].
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    CapabilityDominanceError,
    DomainError,
    FitDiverged,
    InvalidBreakpoints,
    UnsupportedSpec,
)

log = logging.getLogger(__name__)

SIDES = ("charge", "discharge")
P_FLOOR = 0.3  # lowest part-load covered by the source curves
_SOC_SLACK = 1e-7


@dataclass(frozen=True)
class ModelACoefficients:
    """Linear dependence of knot location and exponent on part-load."""

    a_ch_slope: float = 41.4
    b_ch_slope: float = -1.683
    b_ch_intercept: float = 5.351
    a_dis_slope: float = -39.282
    a_dis_intercept: float = 100.0
    b_dis_slope: float = -1.627
    b_dis_intercept: float = 5.373
    a_ch_intercept: float = 0.0

    def knot(self, p, side: str):
        if side == "charge":
            return self.a_ch_slope * p + self.a_ch_intercept
        return self.a_dis_slope * p + self.a_dis_intercept

    def exponent(self, p, side: str):
        if side == "charge":
            return self.b_ch_slope * p + self.b_ch_intercept
        return self.b_dis_slope * p + self.b_dis_intercept


DEFAULT_COEFFS = ModelACoefficients()


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"side must be 'charge' or 'discharge', got {side!r}")


def _check_soc(soc) -> np.ndarray:
    s = np.asarray(soc, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s < -_SOC_SLACK) or np.any(s > 100 + _SOC_SLACK):
        raise DomainError(f"SoC must lie in [0, 100] percent, got range [{np.min(s)}, {np.max(s)}]")
    return np.clip(s, 0.0, 100.0)


def _check_p(p) -> np.ndarray:
    q = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(q)) or np.any(q <= 0) or np.any(q > 1 + 1e-9):
        raise DomainError("part-load p must lie in (0, 1]")
    if np.any(q < P_FLOOR):
        log.debug("part-load below %.2f: extrapolating knot/exponent fits", P_FLOOR)
    return np.minimum(q, 1.0)


def is_extrapolated(p) -> bool:
    """True when any part-load value lies below the fitted range."""
    return bool(np.any(np.asarray(p) < P_FLOOR))


def _unit_progress(s, p, side, coeffs):
    """Normalised distance past the knot (0 at the knot, 1 at the far end)."""
    a = coeffs.knot(p, side)
    if side == "charge":
        u = (s - a) / (100.0 - a)
    else:
        u = (a - s) / a
    return np.clip(u, 0.0, 1.0), a


def eval_A(soc, p, side: str, coeffs: ModelACoefficients = DEFAULT_COEFFS):
    _check_side(side)
    s = _check_soc(soc)
    q = _check_p(p)
    u, _ = _unit_progress(s, q, side, coeffs)
    b = coeffs.exponent(q, side)
    out = np.clip(1.0 - u**b, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def eval_charge_A(soc, p, coeffs: ModelACoefficients = DEFAULT_COEFFS):
    return eval_A(soc, p, "charge", coeffs)


def eval_discharge_A(soc, p, coeffs: ModelACoefficients = DEFAULT_COEFFS):
    return eval_A(soc, p, "discharge", coeffs)


def gradient_A(soc, p, coeffs: ModelACoefficients = DEFAULT_COEFFS, side: str = "charge"):
    """d(eta)/d(SoC) per percent. Zero on the flat branch; one-sided at the knot."""
    _check_side(side)
    s = _check_soc(soc)
    q = _check_p(p)
    u, a = _unit_progress(s, q, side, coeffs)
    b = coeffs.exponent(q, side)
    if side == "charge":
        g = -b * u ** (b - 1.0) / (100.0 - a)
    else:
        g = b * u ** (b - 1.0) / a
    g = np.where(u > 0, g, 0.0)
    return float(g) if np.ndim(g) == 0 else g


B_LOADS = {"M": 1.0, "H": 0.5}


def eval_B(soc, variant: str, coeffs: ModelACoefficients = DEFAULT_COEFFS, side: str = "charge"):
    if variant not in B_LOADS:
        raise UnsupportedSpec(f"Model B variant must be M or H, got {variant!r}")
    return eval_A(soc, B_LOADS[variant], side, coeffs)


def eval_D(soc, side: str):
    _check_side(side)
    s = _check_soc(soc)
    out = 1.0 - s / 100.0 if side == "charge" else s / 100.0
    return float(out) if np.ndim(out) == 0 else out


def eval_E(soc=None, side: str = "charge"):
    if soc is None or np.ndim(soc) == 0:
        return 1.0
    return np.ones(np.shape(soc))


@dataclass(frozen=True)
class LinearSegment:
    """eta(SoC) = slope * SoC + intercept, SoC in percent."""

    slope: float
    intercept: float

    def __call__(self, soc):
        return self.slope * np.asarray(soc, dtype=float) + self.intercept


def _validate_breakpoints(breakpoints: Sequence[float]) -> tuple[float, ...]:
    bps = tuple(float(b) for b in breakpoints)
    if any(not 0 < b < 100 for b in bps):
        raise InvalidBreakpoints(f"breakpoints must lie strictly inside (0, 100): {bps}")
    if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
        raise InvalidBreakpoints(f"breakpoints must be strictly increasing: {bps}")
    return bps


def build_segments_C(
    breakpoints: Sequence[float], side: str, coeffs: ModelACoefficients = DEFAULT_COEFFS
) -> list[LinearSegment]:
    """Chords of the full-load (B:M) curve between consecutive anchors.

    Anchors are ``{0, *breakpoints, 100}`` in the SoC coordinates of ``side``.
    Because the curve is concave, every chord lies on or below it and the
    pointwise minimum of the chords is the piecewise-linear interpolant.
    """
    _check_side(side)
    bps = _validate_breakpoints(breakpoints)
    anchors = np.array((0.0, *bps, 100.0))
    values = eval_A(anchors, 1.0, side, coeffs)
    segs = []
    for (x0, x1), (y0, y1) in zip(zip(anchors, anchors[1:]), zip(values, values[1:])):
        slope = (y1 - y0) / (x1 - x0)
        segs.append(LinearSegment(slope=float(slope), intercept=float(y0 - slope * x0)))
    return segs


def piecewise_by_region(soc, breakpoints: Sequence[float], side: str, coeffs: ModelACoefficients = DEFAULT_COEFFS):
    """Region-selected piecewise evaluation (segment n on [b_{n-1}, b_n))."""
    segs = build_segments_C(breakpoints, side, coeffs)
    s = np.asarray(soc, dtype=float)
    idx = np.searchsorted(np.asarray(breakpoints, dtype=float), s, side="right")
    slopes = np.array([g.slope for g in segs])[idx]
    inters = np.array([g.intercept for g in segs])[idx]
    return slopes * s + inters


def uniform_breakpoints(n_segments: int) -> tuple[float, ...]:
    return tuple(100.0 * k / n_segments for k in range(1, n_segments))


_C_TAG = re.compile(r"^C(\d+)(?::([\d.,\s]+))?$")


@dataclass(frozen=True)
class CapabilitySpec:
    """A capability model variant.

    ``family`` is one of A, B, C, D, D2, E. ``variant`` is M/H for family B.
    ``breakpoints`` are the charging-side breakpoints of family C (percent);
    the discharging side uses the mirror image ``100 - b``.
    """

    family: str
    variant: str | None = None
    breakpoints: tuple[float, ...] = ()
    coeffs: ModelACoefficients = field(default=DEFAULT_COEFFS, compare=False)
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in ("A", "B", "C", "D", "D2", "E"):
            raise UnsupportedSpec(f"unknown model family {self.family!r}")
        if self.family == "B" and self.variant not in B_LOADS:
            raise UnsupportedSpec("Model B needs variant M or H")
        if self.family == "C":
            object.__setattr__(self, "breakpoints", _validate_breakpoints(self.breakpoints))

    @classmethod
    def parse(cls, tag: str, coeffs: ModelACoefficients = DEFAULT_COEFFS) -> "CapabilitySpec":
        """Parse labels such as ``A``, ``B:M``, ``C2:75``, ``C3``, ``C30``, ``D2``.

        ``C3`` uses breakpoints [60, 80]; other ``CN`` labels use uniform
        breakpoints; ``CN:x1,x2,...`` gives explicit charging breakpoints.
        """
        t = tag.strip().upper()
        if t in ("A", "D", "D2", "E"):
            return cls(t, coeffs=coeffs)
        if t in ("B:M", "B:H"):
            return cls("B", variant=t[-1], coeffs=coeffs)
        m = _C_TAG.match(t)
        if not m:
            raise UnsupportedSpec(f"cannot parse model tag {tag!r}")
        n = int(m.group(1))
        if n < 1:
            raise UnsupportedSpec("Model C needs at least one segment")
        if m.group(2):
            bps = tuple(float(x) for x in m.group(2).split(",") if x.strip())
            if len(bps) != n - 1:
                raise InvalidBreakpoints(f"{tag}: {n} segments need {n - 1} breakpoints, got {len(bps)}")
        elif n == 3:
            bps = (60.0, 80.0)
        else:
            bps = uniform_breakpoints(n)
        return cls("C", breakpoints=bps, coeffs=coeffs, label=tag.strip())

    @classmethod
    def piecewise(cls, breakpoints: Sequence[float], coeffs: ModelACoefficients = DEFAULT_COEFFS) -> "CapabilitySpec":
        return cls("C", breakpoints=tuple(breakpoints), coeffs=coeffs)

    @property
    def tag(self) -> str:
        if self.label:
            return self.label
        if self.family == "B":
            return f"B:{self.variant}"
        if self.family == "C":
            n = len(self.breakpoints) + 1
            if self.breakpoints == uniform_breakpoints(n) and n != 3:
                return f"C{n}"
            if n == 3 and self.breakpoints == (60.0, 80.0):
                return "C3"
            return f"C{n}:" + ",".join(f"{b:g}" for b in self.breakpoints)
        return self.family

    def __str__(self) -> str:
        return self.tag

    @property
    def n_segments(self) -> int:
        return len(self.breakpoints) + 1

    @property
    def is_linear(self) -> bool:
        return self.family in ("C", "D", "D2", "E")

    @property
    def part_load_coupled(self) -> bool:
        return self.family == "A"

    def breakpoints_for(self, side: str) -> tuple[float, ...]:
        if side == "charge":
            return self.breakpoints
        return tuple(100.0 - b for b in reversed(self.breakpoints))

    @cached_property
    def _segments(self) -> dict:
        return {side: build_segments_C(self.breakpoints_for(side), side, self.coeffs) for side in SIDES}

    def segments(self, side: str) -> list[LinearSegment]:
        """Linear rows bounding capability for the LP-representable families."""
        _check_side(side)
        if self.family == "C":
            return self._segments[side]
        if self.family in ("D", "D2"):
            return [LinearSegment(-0.01, 1.0) if side == "charge" else LinearSegment(0.01, 0.0)]
        if self.family == "E":
            return []
        raise UnsupportedSpec(f"Model {self.tag} is not linear-representable")

    def full_load(self) -> float | None:
        if self.family == "B":
            return B_LOADS[self.variant]
        return None

    def eta(self, soc, side: str, p=None):
        """Capability fraction at ``soc`` percent (and part-load ``p`` for Model A)."""
        if self.family == "E":
            _check_soc(soc)
            return eval_E(soc, side)
        if self.family in ("D", "D2"):
            return eval_D(soc, side)
        if self.family == "B":
            return eval_B(soc, self.variant, self.coeffs, side)
        if self.family == "A":
            return eval_A(soc, 1.0 if p is None else p, side, self.coeffs)
        s = _check_soc(soc)
        # chords end at exact zeros; clip the rounding residue
        vals = np.clip(np.min([g(s) for g in self.segments(side)], axis=0), 0.0, 1.0)
        return float(vals) if np.ndim(vals) == 0 else vals

    def slope(self, soc, side: str, p=None):
        """Derivative of ``eta`` in SoC percent (concave families only)."""
        if self.family == "A":
            return gradient_A(soc, 1.0 if p is None else p, self.coeffs, side)
        if self.family == "B":
            return gradient_A(soc, B_LOADS[self.variant], self.coeffs, side)
        raise UnsupportedSpec(f"no analytic slope for Model {self.tag}")


def check_dominance(
    upper: CapabilitySpec,
    lower: CapabilitySpec,
    n_grid: int = 1000,
    slack: float = 1e-9,
    p_grid: Sequence[float] | None = None,
) -> float:
    """Largest excess of ``lower`` over ``upper`` on an SoC grid (both sides).

    For Model A the check runs over ``p_grid`` (default 0.3..1.0).
    Raises :class:`CapabilityDominanceError` when the excess exceeds ``slack``.
    """
    soc = np.linspace(0.0, 100.0, n_grid)
    if p_grid is None:
        p_grid = np.linspace(P_FLOOR, 1.0, 29)
    worst = -np.inf
    for side in SIDES:
        for pu in p_grid if upper.family == "A" else [None]:
            hi = upper.eta(soc, side, pu)
            for pl in p_grid if lower.family == "A" else [None]:
                lo = lower.eta(soc, side, pl)
                worst = max(worst, float(np.max(lo - hi)))
    if worst > slack:
        raise CapabilityDominanceError(f"{lower.tag} exceeds {upper.tag} by {worst:.3g}")
    return worst


# -- curve fitting -----------------------------------------------------------


@dataclass
class LevelFit:
    p: float
    knot: float
    exponent: float
    residual_norm: float
    n_samples: int


@dataclass
class CapabilityFit:
    side: str
    levels: list[LevelFit]
    knot_slope: float | None = None
    knot_intercept: float | None = None
    exponent_slope: float | None = None
    exponent_intercept: float | None = None
    underdetermined: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def residual_norm(self) -> float:
        return max(lv.residual_norm for lv in self.levels)


def _fit_level(soc: np.ndarray, eta: np.ndarray, side: str, p: float) -> LevelFit:
    s = np.asarray(soc, dtype=float)
    y = np.asarray(eta, dtype=float)
    # Discharge curves are charge curves in mirrored SoC.
    x = s if side == "charge" else 100.0 - s
    curved = y < 1.0 - 1e-9
    if curved.sum() < 2:
        raise FitDiverged(f"p={p:g}: no curved branch in samples (knot at the boundary)")
    flat = x[~curved]
    a0 = float(flat.max()) if flat.size else float(x[curved].min()) * 0.9
    a0 = min(a0, 99.0)

    def model(theta):
        a, b = theta
        u = np.clip((x - a) / (100.0 - a), 0.0, 1.0)
        return 1.0 - u**b

    starts = [(a0, b0) for b0 in (1.5, 3.0, 6.0)]
    best = None
    for start in starts:
        res = least_squares(
            lambda th: model(th) - y,
            x0=np.array(start),
            bounds=([0.0, 1.0], [99.5, 50.0]),
            xtol=1e-14,
            ftol=1e-14,
            gtol=1e-14,
        )
        if best is None or res.cost < best.cost:
            best = res
    a, b = best.x
    knot = a if side == "charge" else 100.0 - a
    return LevelFit(
        p=float(p),
        knot=float(knot),
        exponent=float(b),
        residual_norm=float(np.linalg.norm(best.fun)),
        n_samples=int(s.size),
    )


def fit_capability_params(
    samples: Mapping[float, tuple[Sequence[float], Sequence[float]]],
    side: str = "charge",
    max_residual: float = 0.5,
) -> CapabilityFit:
    """Fit knot and exponent per part-load level, then regress both on p.

    ``samples`` maps part-load ``p`` to ``(soc_pct, eta)`` arrays. A single
    level gives per-level parameters only and ``underdetermined=True``.
    """
    _check_side(side)
    levels = []
    for p in sorted(samples):
        soc, eta = samples[p]
        if len(soc) < 10:
            raise FitDiverged(f"p={p:g}: need at least 10 samples, got {len(soc)}")
        lv = _fit_level(np.asarray(soc), np.asarray(eta), side, p)
        if lv.residual_norm > max_residual:
            raise FitDiverged(f"p={p:g}: residual norm {lv.residual_norm:.3g} exceeds {max_residual}")
        levels.append(lv)
    fit = CapabilityFit(side=side, levels=levels)
    if len(levels) < 2:
        fit.underdetermined = True
        fit.notes.append("single part-load level: linear stage underdetermined")
        return fit
    ps = np.array([lv.p for lv in levels])
    fit.knot_slope, fit.knot_intercept = (float(v) for v in np.polyfit(ps, [lv.knot for lv in levels], 1))
    fit.exponent_slope, fit.exponent_intercept = (float(v) for v in np.polyfit(ps, [lv.exponent for lv in levels], 1))
    return fit


def coefficients_from_fits(ch: CapabilityFit, dis: CapabilityFit) -> ModelACoefficients:
    if ch.underdetermined or dis.underdetermined:
        raise FitDiverged("both sides need at least two part-load levels")
    return ModelACoefficients(
        a_ch_slope=ch.knot_slope,
        a_ch_intercept=ch.knot_intercept,
        b_ch_slope=ch.exponent_slope,
        b_ch_intercept=ch.exponent_intercept,
        a_dis_slope=dis.knot_slope,
        a_dis_intercept=dis.knot_intercept,
        b_dis_slope=dis.exponent_slope,
        b_dis_intercept=dis.exponent_intercept,
    )


def sample_curves(
    p_levels: Sequence[float],
    side: str,
    n: int = 201,
    coeffs: ModelACoefficients = DEFAULT_COEFFS,
    noise: float = 0.0,
    seed: int = 0,
) -> dict[float, tuple[np.ndarray, np.ndarray]]:
    """Synthetic capability samples on a uniform SoC grid (for fitting demos)."""
    rng = np.random.default_rng(seed)
    soc = np.linspace(0.0, 100.0, n)
    out = {}
    for p in p_levels:
        eta = eval_A(soc, p, side, coeffs)
        if noise:
            eta = np.clip(eta + rng.normal(0.0, noise, size=eta.shape), 0.0, 1.0)
        out[float(p)] = (soc, eta)
    return out


def capability_grid(spec: CapabilitySpec, n: int = 101, p_levels: Sequence[float] = (1.0,)):
    """Rows (soc_pct, p, eta_ch, eta_dis) for plotting; ``p`` is NaN unless Model A."""
    soc = np.linspace(0.0, 100.0, n)
    rows = []
    levels = p_levels if spec.family == "A" else [None]
    for p in levels:
        ch = spec.eta(soc, "charge", p)
        dis = spec.eta(soc, "discharge", p)
        for s, c, d in zip(soc, np.broadcast_to(ch, soc.shape), np.broadcast_to(dis, soc.shape)):
            rows.append((float(s), float("nan") if p is None else float(p), float(c), float(d)))
    return rows
