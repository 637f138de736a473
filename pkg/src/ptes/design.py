"""PTES design parameters, cycle COP, packed-bed capacity and the D2 rescale."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateCycle, InputError

KELVIN_OFFSET = 273.15


@dataclass(frozen=True)
class OperatingTemperatures:
    """Cycle temperatures in kelvin.

    Use :meth:`from_celsius` at the IO boundary; everything downstream works
    in kelvin.
    """

    t_ch_comp_in: float
    t_ch_comp_out: float
    t_ch_exp_in: float
    t_ch_exp_out: float
    t_dis_comp_in: float
    t_dis_comp_out1: float
    t_dis_comp_out2: float
    t_dis_exp_in: float
    t_dis_exp_out: float

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if not getattr(self, f.name) > 0:
                raise InputError(f"{f.name} must be > 0 K, got {getattr(self, f.name)}")
        if not self.t_ch_comp_out > self.t_ch_comp_in:
            raise InputError("charging compressor outlet must be hotter than its inlet")
        if not self.t_dis_exp_in > self.t_dis_exp_out:
            raise InputError("discharging expander inlet must be hotter than its outlet")

    @classmethod
    def from_celsius(cls, **temps_c: float) -> "OperatingTemperatures":
        return cls(**{k: v + KELVIN_OFFSET for k, v in temps_c.items()})

    def shifted(self, delta: float) -> "OperatingTemperatures":
        return OperatingTemperatures(
            **{f.name: getattr(self, f.name) + delta for f in dataclasses.fields(self)}
        )


@dataclass(frozen=True)
class PackedBedSpec:
    volume: float  # m3
    density: float  # kg/m3
    void_fraction: float
    cp_medium: float  # kJ/kg/K
    delta_t: float  # K

    def __post_init__(self):
        if self.volume <= 0 or self.density <= 0 or self.cp_medium <= 0:
            raise InputError("volume, density and cp_medium must be positive")
        if not 0 < self.void_fraction < 1:
            raise InputError("void_fraction must lie in (0, 1)")
        if self.delta_t < 0:
            raise InputError("delta_t must be non-negative")


@dataclass(frozen=True)
class PtesDesign:
    """Nameplate design of one PTES plant.

    Powers are electric kW, ``energy_capacity`` is thermal kWh, ``gamma`` is
    the per-hour leakage fraction. ``cost_multiplier_ch``/``_dis`` are only
    different from 1 for a D2-rescaled design.
    """

    w_ch_max: float
    w_dis_max: float
    energy_capacity: float
    alpha_ch: float
    alpha_dis: float
    eta_mg: float = 0.98
    gamma: float = 0.0002
    cp_fluid: float = 0.5203
    cost_multiplier_ch: float = 1.0
    cost_multiplier_dis: float = 1.0

    def __post_init__(self):
        if min(self.w_ch_max, self.w_dis_max, self.energy_capacity) <= 0:
            raise InputError("capacities must be positive")
        if not 0 < self.eta_mg <= 1:
            raise InputError("eta_mg must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise InputError("gamma must lie in [0, 1)")
        if self.alpha_ch <= 0 or self.alpha_dis <= 0:
            raise InputError("COP factors must be positive")

    def w_max(self, side: str) -> float:
        return self.w_ch_max if side == "charge" else self.w_dis_max

    def replace(self, **changes) -> "PtesDesign":
        return dataclasses.replace(self, **changes)


# Table values of the reference plant (temperatures in Celsius).
REFERENCE_TEMPERATURES_C = dict(
    t_ch_comp_out=590.0,
    t_dis_exp_in=590.0,
    t_ch_exp_out=-100.0,
    t_dis_comp_in=-100.0,
    t_ch_comp_in=166.0,
    t_dis_exp_out=166.0,
    t_ch_exp_in=25.0,
    t_dis_comp_out2=25.0,
    t_dis_comp_out1=124.0,
)
REFERENCE_CP_ARGON = 0.5203
# 590 C hot end to 25 C ambient-side return.
REFERENCE_BED = PackedBedSpec(volume=30.0, density=4800.0, void_fraction=0.425, cp_medium=0.848, delta_t=565.0)


def reference_temperatures() -> OperatingTemperatures:
    return OperatingTemperatures.from_celsius(**REFERENCE_TEMPERATURES_C)


def reference_design() -> PtesDesign:
    """250 kW / 160 kW / 11,021 kWh plant with the tabulated COP factors."""
    return PtesDesign(
        w_ch_max=250.0,
        w_dis_max=160.0,
        energy_capacity=11021.0,
        alpha_ch=1.89,
        alpha_dis=2.83,
        eta_mg=0.98,
        gamma=0.0002,
        cp_fluid=REFERENCE_CP_ARGON,
    )


def compute_cop(temps: OperatingTemperatures, cp_fluid: float) -> tuple[float, float]:
    """Charging and discharging COP factors of the fixed Brayton cycle.

    Returns ``(alpha_ch, alpha_dis)``: heat moved into/out of the hot store per
    unit of net electrical work. ``cp_fluid`` multiplies every term and so
    cancels; it is accepted for dimensional clarity only.
    """
    t = temps
    q_ch = cp_fluid * (t.t_ch_comp_out - t.t_ch_exp_in)
    w_ch = cp_fluid * (t.t_ch_comp_out - t.t_ch_comp_in) - cp_fluid * (t.t_ch_exp_in - t.t_ch_exp_out)
    q_dis = cp_fluid * (t.t_dis_exp_in - t.t_dis_comp_out2)
    w_dis = cp_fluid * (t.t_dis_exp_in - t.t_dis_exp_out) - cp_fluid * (t.t_dis_comp_out1 - t.t_dis_comp_in)
    if w_ch <= 0:
        raise DegenerateCycle(f"charging net work {w_ch:.6g} kJ/kg is not positive")
    if w_dis <= 0:
        raise DegenerateCycle(f"discharging net work {w_dis:.6g} kJ/kg is not positive")
    return q_ch / w_ch, q_dis / w_dis


def storage_energy_capacity(bed: PackedBedSpec) -> float:
    """Sensible heat capacity of the packed bed in thermal kWh."""
    mass = bed.volume * (1.0 - bed.void_fraction) * bed.density
    return mass * bed.cp_medium * bed.delta_t / 3600.0


def capability_mean(fn: Callable[[np.ndarray], np.ndarray], n: int = 10_000) -> float:
    """Midpoint-rule mean of ``fn`` over SoC in [0, 100] percent."""
    grid = (np.arange(n) + 0.5) * (100.0 / n)
    return float(np.mean(fn(grid)))


def rescale_design_d2(design: PtesDesign, bm_capability, n: int = 10_000) -> PtesDesign:
    """Return the D2 design: nameplate powers scaled so the linear capability
    has the same SoC-average as the B:M curve.

    ``bm_capability`` is any object with ``eta(soc_pct, side)``, normally
    ``CapabilitySpec.parse("B:M")``. The linear D curve averages exactly 0.5.
    The attached cost multipliers equal the power ratios, keeping the
    capability-weighted capacity cost unchanged.
    """
    r_ch = capability_mean(lambda s: bm_capability.eta(s, "charge"), n) / 0.5
    r_dis = capability_mean(lambda s: bm_capability.eta(s, "discharge"), n) / 0.5
    return design.replace(
        w_ch_max=design.w_ch_max * r_ch,
        w_dis_max=design.w_dis_max * r_dis,
        cost_multiplier_ch=design.cost_multiplier_ch * r_ch,
        cost_multiplier_dis=design.cost_multiplier_dis * r_dis,
    )


def round_trip_efficiency(design: PtesDesign) -> float:
    return design.eta_mg**2 * design.alpha_ch / design.alpha_dis


@dataclass(frozen=True)
class DesignBlock:
    """Config-level bundle: the design plus the physics it was derived from."""

    design: PtesDesign
    temperatures: OperatingTemperatures | None = None
    bed: PackedBedSpec | None = None
    notes: list[str] = field(default_factory=list)


def design_from_config(block: dict) -> DesignBlock:
    """Build a design from a config mapping.

    Temperatures are read in Celsius. When ``alpha_ch``/``alpha_dis`` or
    ``energy_capacity`` are missing they are derived from the temperatures
    and packed-bed block.
    """
    notes = []
    temps = None
    bed = None
    if "temperatures_c" in block:
        temps = OperatingTemperatures.from_celsius(**block["temperatures_c"])
    if "packed_bed" in block:
        bed = PackedBedSpec(**block["packed_bed"])
    cp_fluid = float(block.get("cp_fluid", REFERENCE_CP_ARGON))
    alpha_ch = block.get("alpha_ch")
    alpha_dis = block.get("alpha_dis")
    if alpha_ch is None or alpha_dis is None:
        if temps is None:
            raise InputError("design needs alpha_ch/alpha_dis or a temperatures_c block")
        a_ch, a_dis = compute_cop(temps, cp_fluid)
        alpha_ch = a_ch if alpha_ch is None else alpha_ch
        alpha_dis = a_dis if alpha_dis is None else alpha_dis
        notes.append("COP factors derived from temperatures")
    energy = block.get("energy_capacity")
    if energy is None:
        if bed is None:
            raise InputError("design needs energy_capacity or a packed_bed block")
        energy = storage_energy_capacity(bed)
        notes.append("energy capacity derived from packed bed")
    design = PtesDesign(
        w_ch_max=float(block["w_ch_max"]),
        w_dis_max=float(block["w_dis_max"]),
        energy_capacity=float(energy),
        alpha_ch=float(alpha_ch),
        alpha_dis=float(alpha_dis),
        eta_mg=float(block.get("eta_mg", 0.98)),
        gamma=float(block.get("gamma", 0.0002)),
        cp_fluid=cp_fluid,
    )
    return DesignBlock(design=design, temperatures=temps, bed=bed, notes=notes)
