import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ptes.capability import CapabilitySpec
from ptes.design import (
    REFERENCE_BED,
    OperatingTemperatures,
    PackedBedSpec,
    PtesDesign,
    capability_mean,
    compute_cop,
    design_from_config,
    reference_design,
    reference_temperatures,
    rescale_design_d2,
    round_trip_efficiency,
    storage_energy_capacity,
)
from scipy.integrate import trapezoid

from ptes.errors import DegenerateCycle, InputError


def test_reference_cop_hand_formula():
    a_ch, a_dis = compute_cop(reference_temperatures(), 0.5203)
    # hand evaluation in Celsius differences
    assert a_ch == pytest.approx((590 - 25) / ((590 - 166) - (25 + 100)), rel=1e-12)
    assert a_dis == pytest.approx((590 - 25) / ((590 - 166) - (124 + 100)), rel=1e-12)
    assert abs(a_ch - 1.89) <= 0.005
    assert abs(a_dis - 2.83) <= 0.005 + 1e-9


def test_cop_vanishing_expander_term_gives_one():
    t = OperatingTemperatures.from_celsius(
        t_ch_comp_in=100, t_ch_comp_out=600, t_ch_exp_in=100, t_ch_exp_out=100,
        t_dis_comp_in=-100, t_dis_comp_out1=124, t_dis_comp_out2=25, t_dis_exp_in=590, t_dis_exp_out=166,
    )
    a_ch, _ = compute_cop(t, 0.5203)
    assert a_ch == pytest.approx(1.0, abs=1e-12)


def test_cop_independent_of_fluid_cp():
    t = reference_temperatures()
    assert compute_cop(t, 0.5203) == pytest.approx(compute_cop(t, 2 * 0.5203), rel=1e-12)


def test_cop_degenerate_cycle_raises():
    t = OperatingTemperatures.from_celsius(
        t_ch_comp_in=166, t_ch_comp_out=200, t_ch_exp_in=25, t_ch_exp_out=-100,
        t_dis_comp_in=-100, t_dis_comp_out1=124, t_dis_comp_out2=25, t_dis_exp_in=590, t_dis_exp_out=166,
    )
    with pytest.raises(DegenerateCycle):
        compute_cop(t, 0.5203)


@given(st.floats(-50.0, 500.0))
def test_cop_invariant_under_uniform_shift(delta):
    t = reference_temperatures()
    base = compute_cop(t, 0.5203)
    shifted = compute_cop(t.shifted(delta), 0.5203)
    assert shifted == pytest.approx(base, rel=1e-9)


def test_temperatures_validated():
    with pytest.raises(InputError):
        OperatingTemperatures.from_celsius(
            t_ch_comp_in=600, t_ch_comp_out=590, t_ch_exp_in=25, t_ch_exp_out=-100,
            t_dis_comp_in=-100, t_dis_comp_out1=124, t_dis_comp_out2=25, t_dis_exp_in=590, t_dis_exp_out=166,
        )
    with pytest.raises(InputError):
        OperatingTemperatures.from_celsius(
            t_ch_comp_in=166, t_ch_comp_out=590, t_ch_exp_in=25, t_ch_exp_out=-300,
            t_dis_comp_in=-100, t_dis_comp_out1=124, t_dis_comp_out2=25, t_dis_exp_in=590, t_dis_exp_out=166,
        )


def test_energy_capacity_hand_calculation():
    # m * cp * dT / 3600 with m = V (1 - eps) rho
    m = 30 * (1 - 0.425) * 4800
    expected = m * 0.848 * 565 / 3600
    got = storage_energy_capacity(REFERENCE_BED)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(11021, rel=0.01)


def test_energy_capacity_zero_span_and_halved_volume():
    bed = PackedBedSpec(30, 4800, 0.425, 0.848, 0.0)
    assert storage_energy_capacity(bed) == 0.0
    half = PackedBedSpec(15, 4800, 0.425, 0.848, 565)
    assert storage_energy_capacity(half) == pytest.approx(storage_energy_capacity(REFERENCE_BED) / 2, rel=1e-12)


@given(st.floats(0.1, 100.0), st.floats(1.0, 1000.0), st.floats(0.5, 4.0))
def test_energy_capacity_linear_in_volume_and_span(v, dt, k):
    a = storage_energy_capacity(PackedBedSpec(v, 4800, 0.425, 0.848, dt))
    assert storage_energy_capacity(PackedBedSpec(k * v, 4800, 0.425, 0.848, dt)) == pytest.approx(k * a, rel=1e-12)
    assert storage_energy_capacity(PackedBedSpec(v, 4800, 0.425, 0.848, k * dt)) == pytest.approx(k * a, rel=1e-12)


def test_d2_rescale_charging_power():
    bm = CapabilitySpec.parse("B:M")
    # independent quadrature: trapezoid on a fine grid
    s = np.linspace(0, 100, 200_001)
    mean_ch = trapezoid(bm.eta(s, "charge"), s) / 100
    d2 = rescale_design_d2(reference_design(), bm)
    assert d2.w_ch_max == pytest.approx(250 * mean_ch / 0.5, rel=1e-6)
    assert d2.w_ch_max == pytest.approx(437, abs=1.0)
    assert d2.cost_multiplier_ch == pytest.approx(d2.w_ch_max / 250, rel=1e-12)


class _Const:
    def __init__(self, f):
        self.f = f

    def eta(self, s, side):
        return self.f(np.asarray(s), side)


def test_d2_rescale_trivial_ratios():
    d = reference_design()
    one = rescale_design_d2(d, _Const(lambda s, side: np.ones_like(s)))
    assert one.w_ch_max == pytest.approx(2 * d.w_ch_max, rel=1e-12)
    assert one.w_dis_max == pytest.approx(2 * d.w_dis_max, rel=1e-12)
    dspec = CapabilitySpec.parse("D")
    same = rescale_design_d2(d, dspec)
    assert same.w_ch_max == pytest.approx(d.w_ch_max, rel=1e-9)
    assert same.w_dis_max == pytest.approx(d.w_dis_max, rel=1e-9)


def test_d2_rescale_keeps_other_fields():
    d = reference_design()
    d2 = rescale_design_d2(d, CapabilitySpec.parse("B:M"))
    for f in ("energy_capacity", "gamma", "eta_mg", "alpha_ch", "alpha_dis", "cp_fluid"):
        assert getattr(d2, f) == getattr(d, f)


def test_capability_mean_midpoint_rule():
    assert capability_mean(lambda s: s / 100) == pytest.approx(0.5, abs=1e-12)


def test_round_trip_efficiency():
    assert round_trip_efficiency(reference_design()) == pytest.approx(0.98**2 * 1.89 / 2.83, rel=1e-12)
    assert round_trip_efficiency(reference_design()) == pytest.approx(0.641, abs=5e-4)
    eq = PtesDesign(1, 1, 1, 2.0, 2.0, eta_mg=1.0)
    assert round_trip_efficiency(eq) == 1.0
    assert round_trip_efficiency(eq.replace(eta_mg=0.5)) == 0.25


@pytest.mark.parametrize("bad", [
    dict(w_ch_max=0), dict(energy_capacity=-1), dict(eta_mg=0), dict(eta_mg=1.1), dict(gamma=1.0), dict(alpha_ch=0),
])
def test_design_invariants(bad):
    with pytest.raises(InputError):
        reference_design().replace(**bad)


def test_design_from_config_derives_missing_values():
    block = {
        "w_ch_max": 250, "w_dis_max": 160,
        "temperatures_c": dict(
            t_ch_comp_out=590, t_dis_exp_in=590, t_ch_exp_out=-100, t_dis_comp_in=-100, t_ch_comp_in=166,
            t_dis_exp_out=166, t_ch_exp_in=25, t_dis_comp_out2=25, t_dis_comp_out1=124,
        ),
        "packed_bed": dict(volume=30, density=4800, void_fraction=0.425, cp_medium=0.848, delta_t=565),
    }
    blk = design_from_config(block)
    assert blk.design.alpha_dis == pytest.approx(2.825, rel=1e-12)
    assert blk.design.energy_capacity == pytest.approx(storage_energy_capacity(REFERENCE_BED))
    assert len(blk.notes) == 2
    with pytest.raises(InputError):
        design_from_config({"w_ch_max": 250, "w_dis_max": 160, "energy_capacity": 100})
