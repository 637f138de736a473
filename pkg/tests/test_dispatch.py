import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ptes.capability import CapabilitySpec
from ptes.design import reference_design
from ptes.dispatch import (
    DispatchSolution,
    PriceSeries,
    build_problem,
    profit,
    simultaneity_ok,
    soc_step,
    validate_solution,
)
from ptes.errors import InputError, LengthMismatch
from ptes.optimizer import solve

from conftest import sine_prices

D = reference_design()


def test_soc_step_pure_leakage():
    assert soc_step(0.5, 0, 0, D) == pytest.approx(0.4999, abs=1e-15)


def test_soc_step_charge():
    expected = 0.5 * 0.9998 + 1.89 * 250 * 0.98 / 11021
    assert soc_step(0.5, 250, 0, D) == pytest.approx(expected, abs=1e-15)
    assert soc_step(0.5, 250, 0, D) == pytest.approx(0.54192, abs=1e-5)


def test_soc_step_discharge():
    expected = 0.5 * 0.9998 - 2.83 * 160 / 0.98 / 11021
    assert soc_step(0.5, 0, 160, D) == pytest.approx(expected, abs=1e-15)
    assert soc_step(0.5, 0, 160, D) == pytest.approx(0.457977, abs=1e-6)


def test_price_series_invariants():
    with pytest.raises(InputError):
        PriceSeries("x", [1.0])
    with pytest.raises(InputError):
        PriceSeries("x", [1.0, np.nan])
    s = PriceSeries("x", [1.0, 2.0])
    with pytest.raises(ValueError):
        s.prices[0] = 3.0


def test_build_counts_model_e():
    p = build_problem(D, CapabilitySpec.parse("E"), PriceSeries("t", [10.0, 20.0]))
    assert p.lp.n_cols == 3 * 2
    assert p.n_box == 4
    assert p.row_counts == {"balance": 1, "cyclic": 1, "capability": 0}


def test_build_counts_c3_full_year():
    p = build_problem(D, CapabilitySpec.parse("C3"), PriceSeries("t", np.ones(8760)))
    assert p.row_counts["capability"] == 2 * 3 * 8760


def test_build_marks_model_a_nonlinear():
    p = build_problem(D, CapabilitySpec.parse("A"), PriceSeries("t", [1.0, 2.0]))
    assert not p.is_linear
    assert p.part_load_coupled


def test_initial_soc_pin():
    p = build_problem(D, CapabilitySpec.parse("E"), PriceSeries("t", sine_prices(24)), initial_soc=0.3)
    sol = solve(p)
    assert sol.soc[-1] == pytest.approx(0.3, abs=1e-9)
    with pytest.raises(InputError):
        build_problem(D, CapabilitySpec.parse("E"), PriceSeries("t", [1.0, 2.0]), initial_soc=1.5)


def _zero_solution(H, soc0=0.0):
    return DispatchSolution("zero", np.zeros(H), np.zeros(H), np.full(H, soc0), 0.0)


def test_validate_all_zero_is_feasible():
    p = build_problem(D, CapabilitySpec.parse("B:M"), PriceSeries("t", sine_prices(24)))
    rep = validate_solution(p, _zero_solution(24))
    assert rep.feasible
    assert rep.profit == 0.0


def test_model_e_violates_bm_on_toy():
    # cheap night hours then expensive evening: Model E fills the store at full power
    prices = np.array([5.0] * 12 + [80.0] * 12)
    p = build_problem(D, CapabilitySpec.parse("E"), PriceSeries("t", prices))
    sol = solve(p)
    rep = validate_solution(p, sol, spec=CapabilitySpec.parse("B:M"))
    assert rep.capability_violation > 1e-3
    assert validate_solution(p, sol).feasible


def test_validate_length_mismatch():
    p = build_problem(D, CapabilitySpec.parse("E"), PriceSeries("t", sine_prices(24)))
    with pytest.raises(LengthMismatch):
        validate_solution(p, _zero_solution(23))


def test_profit_examples():
    assert profit(_zero_solution(3), np.array([1.0, 2.0, 3.0])) == 0.0
    one = DispatchSolution("x", np.zeros(1), np.array([160.0]), np.zeros(1), 0.0)
    assert profit(one, np.array([50.0])) == pytest.approx(8.0, abs=1e-12)


@pytest.mark.parametrize("tag", ["E", "B:M", "C3", "D", "A"])
def test_profit_recompute_equals_objective(tag):
    prices = PriceSeries("t", sine_prices(168))
    p = build_problem(D, CapabilitySpec.parse(tag), prices)
    sol = solve(p)
    assert profit(sol, prices) == pytest.approx(sol.objective, rel=1e-9)
    if sol.stats.bound is not None and tag in ("E", "C3", "D"):
        assert sol.stats.bound == pytest.approx(sol.objective, rel=1e-6)


@pytest.mark.parametrize("tag", ["E", "B:M", "C2:75", "D", "D2", "A"])
def test_energy_closure_and_simultaneity(tag):
    prices = PriceSeries("t", sine_prices(168, seed=3))
    p = build_problem(D, CapabilitySpec.parse(tag), prices)
    sol = solve(p)
    d = p.design
    recomputed = soc_step(sol.soc[-1], sol.w_ch[0], sol.w_dis[0], d)
    assert abs(recomputed - sol.soc[0]) <= 1e-8
    assert simultaneity_ok(sol, d)


def test_feasible_set_nesting_by_cross_validation():
    prices = PriceSeries("t", sine_prices(168, seed=4))
    order = ["D", "C2:75", "C3", "C30", "B:M", "E"]
    for i, tag in enumerate(order):
        p = build_problem(D, CapabilitySpec.parse(tag), prices)
        sol = solve(p)
        for looser in order[i:]:
            spec = CapabilitySpec.parse(looser)
            if looser.startswith("C") and tag.startswith("C") and looser != tag:
                continue  # different breakpoint sets are not nested
            # the cut loop stops at the cut tolerance
            tol = 1e-5 if tag == "B:M" else 1e-6
            rep = validate_solution(p, sol, tol=tol, spec=spec)
            assert rep.capability_violation <= tol, (tag, looser)


@given(st.integers(0, 10_000))
def test_profit_ordering_property(seed):
    prices = PriceSeries("t", sine_prices(48, seed))
    obj = {t: solve(build_problem(D, CapabilitySpec.parse(t), prices)).objective
           for t in ("E", "B:M", "C30", "C2:75", "C3", "D")}
    slack = 1e-5 * max(1.0, abs(obj["E"]))
    assert obj["E"] >= obj["B:M"] - slack
    assert obj["B:M"] >= obj["C30"] - slack
    assert obj["B:M"] >= obj["C3"] - slack
    assert obj["B:M"] >= obj["C2:75"] - slack
    for c in ("C30", "C3", "C2:75"):
        assert obj[c] >= obj["D"] - slack


def test_constant_prices_zero_operation():
    prices = PriceSeries("flat", np.full(48, 30.0))
    for tag in ("E", "D", "C3"):
        sol = solve(build_problem(D, CapabilitySpec.parse(tag), prices))
        assert sol.objective == pytest.approx(0.0, abs=1e-9)
