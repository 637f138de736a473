import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from ptes.capability import CapabilitySpec
from ptes.design import reference_design
from ptes.dispatch import PriceSeries, build_problem, validate_solution
from ptes.errors import UnsupportedSpec
from ptes.lp import LpInstance, LpSession, SolveOptions, Status, solve_lp
from ptes.optimizer import (
    solve,
    solve_convex_b,
    solve_milp_piecewise,
    solve_model_a,
    solve_piecewise_lp,
    time_solve,
    with_options,
)

from conftest import sine_prices

D = reference_design()
K_CH = D.alpha_ch * D.eta_mg / D.energy_capacity
K_DIS = D.alpha_dis / (D.eta_mg * D.energy_capacity)
G = 1 - D.gamma


def _problem(tag, prices, label="t"):
    return build_problem(D, CapabilitySpec.parse(tag), PriceSeries(label, np.asarray(prices, dtype=float)))


# ---- LP layer

def test_lp_single_bound():
    inst = LpInstance(c=[1.0], A=sp.csr_matrix([[1.0]]), row_lo=[-np.inf], row_hi=[3.0],
                      col_lo=[0.0], col_hi=[np.inf], sense="max")
    x, stats = solve_lp(inst)
    assert stats.status == Status.OPTIMAL
    assert x[0] == pytest.approx(3.0)


def test_lp_duplicate_rows_same_optimum():
    p = _problem("C3", sine_prices(48))
    x1, s1 = solve_lp(p.lp)
    lp = p.lp
    dup = LpInstance(c=lp.c, A=sp.vstack([lp.A, lp.A]), row_lo=np.concatenate([lp.row_lo, lp.row_lo]),
                     row_hi=np.concatenate([lp.row_hi, lp.row_hi]), col_lo=lp.col_lo, col_hi=lp.col_hi, sense="max")
    x2, s2 = solve_lp(dup)
    assert s2.bound == pytest.approx(s1.bound, rel=1e-9)


def test_session_time_limit_counts_from_now():
    # the solver's own clock keeps running across re-solves of one session
    p = build_problem(reference_design(), CapabilitySpec.parse("C3"), PriceSeries("s", sine_prices(168)))
    sess = LpSession(p.lp)
    assert sess.solve() == Status.OPTIMAL
    spent = sess.h.getRunTime()
    assert spent > 0
    sess.set_time_limit(5.0)
    assert sess.h.getOptionValue("time_limit")[1] == pytest.approx(spent + 5.0)
    sess.set_time_limit(float("inf"))
    assert sess.h.getOptionValue("time_limit")[1] == np.inf


def test_lp_infeasible_status():
    inst = LpInstance(c=[1.0], A=sp.csr_matrix([[1.0], [1.0]]), row_lo=[5.0, -np.inf], row_hi=[np.inf, 3.0],
                      col_lo=[0.0], col_hi=[10.0], sense="max")
    x, stats = solve_lp(inst)
    assert x is None
    assert stats.status == Status.INFEASIBLE


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(damping=0.0)
    with pytest.raises(ValueError):
        SolveOptions(cut_tol=0.0)


# ---- linear families

def test_model_e_alternating_prices_matches_greedy():
    # buy at 10, sell at 100 every other hour: discharge at full power each
    # expensive hour and charge just enough the hour before (least leakage)
    prices = np.tile([10.0, 100.0], 12)
    sol = solve_piecewise_lp(_problem("E", prices))
    x = K_DIS * 160 / (G * K_CH)
    assert x <= 250
    expected = 12 * (160 * 100 - x * 10) * 1e-3
    assert sol.objective == pytest.approx(expected, rel=1e-9)
    np.testing.assert_allclose(sol.w_dis[1::2], 160, atol=1e-7)


def test_model_e_two_hour_toy():
    sol = solve_piecewise_lp(_problem("E", [0.0, 1000.0]))
    assert sol.w_dis[1] == pytest.approx(160.0)
    assert sol.objective == pytest.approx(160.0)
    # charge in hour 1 is capped by nameplate and by headroom
    assert sol.w_ch[0] <= 250 + 1e-9
    assert sol.w_ch[0] >= K_DIS * 160 / (G * K_CH) - 1e-6


def test_model_d_constant_prices():
    sol = solve_piecewise_lp(_problem("D", np.full(24, 42.0)))
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    assert validate_solution(_problem("D", np.full(24, 42.0)), sol).feasible


def test_piecewise_rejects_concave_specs():
    with pytest.raises(UnsupportedSpec):
        solve_piecewise_lp(_problem("B:M", sine_prices(24)))


def test_c2_variants_below_bm(prices168):
    bm = solve_convex_b(build_problem(D, CapabilitySpec.parse("B:M"), prices168)).objective
    for tag in ("C2:75", "C2:50"):
        c = solve_piecewise_lp(build_problem(D, CapabilitySpec.parse(tag), prices168)).objective
        assert c <= bm * (1 + 1e-5)


# ---- Model B cut loop

def test_b_constant_prices_one_round():
    sol = solve_convex_b(_problem("B:M", np.full(48, 25.0)))
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    assert sol.stats.cut_rounds <= 1


def test_b_matches_dense_segment_lp(prices168):
    b = solve_convex_b(build_problem(D, CapabilitySpec.parse("B:M"), prices168))
    c200 = solve_piecewise_lp(build_problem(D, CapabilitySpec.parse("C200"), prices168))
    assert b.stats.status == Status.OPTIMAL
    assert abs(b.objective - c200.objective) / abs(c200.objective) <= 5e-3


def test_b_violation_decreases_from_single_seed(prices168):
    sol = solve_convex_b(build_problem(D, CapabilitySpec.parse("B:M"), prices168), seed_points=(100.0,))
    hist = sol.stats.violation_history
    assert hist[0] > 1e-2
    assert all(b < a for a, b in zip(hist, hist[1:]))
    assert hist[-1] <= SolveOptions().cut_tol


def test_b_relaxation_objective_non_increasing(prices168):
    sol = solve_convex_b(build_problem(D, CapabilitySpec.parse("B:H"), prices168), seed_points=(100.0,))
    obj = sol.stats.objective_history
    assert all(b <= a + 1e-9 * abs(a) for a, b in zip(obj, obj[1:]))
    assert sol.stats.bound >= sol.objective - 1e-9


@given(st.floats(0.0, 100.0), st.sampled_from(["charge", "discharge"]), st.sampled_from([0.3, 0.5, 0.8, 1.0]))
def test_tangent_cuts_are_valid(s0, side, p):
    # a tangent of the concave curve never cuts off a feasible point
    spec = CapabilitySpec.parse("A")
    grid = np.linspace(0, 100, 1000)
    tangent = spec.eta(s0, side, p) + spec.slope(s0, side, p) * (grid - s0)
    assert np.all(tangent >= spec.eta(grid, side, p) - 1e-12)


# ---- Model A fixed point

def test_a_constant_prices():
    sol = solve_model_a(_problem("A", np.full(48, 25.0)))
    assert sol.stats.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    assert sol.stats.fixed_point_iters == 1


def test_a_bounded_by_bm(prices168):
    a = solve_model_a(build_problem(D, CapabilitySpec.parse("A"), prices168))
    bm = solve_convex_b(build_problem(D, CapabilitySpec.parse("B:M"), prices168))
    assert a.objective <= bm.objective + 1e-6 * abs(bm.objective)
    assert a.stats.max_violation <= 10 * SolveOptions().p_tol


def test_a_full_load_toy_equals_bm():
    # one cheap and one expensive hour in a day: both sides run at (close to)
    # nameplate, where the part-load curve collapses onto the full-load one
    prices = np.full(24, 30.0)
    prices[3] = 0.0
    prices[18] = 200.0
    a = solve_model_a(_problem("A", prices))
    bm = solve_convex_b(_problem("B:M", prices))
    assert a.stats.status == Status.OPTIMAL
    assert a.p_ch[3] >= 0.99 and a.p_dis[18] >= 0.99
    assert a.objective <= bm.objective
    # residual gap comes from p = 0.998 on the binding discharge hour
    assert a.objective == pytest.approx(bm.objective, rel=1e-4)
    np.testing.assert_allclose(a.w_ch, bm.w_ch, atol=0.05)
    np.testing.assert_allclose(a.w_dis, bm.w_dis, atol=0.05)


def test_a_rejects_other_specs():
    with pytest.raises(UnsupportedSpec):
        solve_model_a(_problem("B:M", sine_prices(24)))


# ---- MILP formulation

@pytest.mark.parametrize("hours,tag", [(24, "C2:75"), (168, "C2:75"), (168, "C3"), (24, "C1"), (48, "C4")])
def test_milp_equals_lp(hours, tag):
    p = _problem(tag, sine_prices(hours, seed=7))
    lp = solve_piecewise_lp(p)
    milp = solve_milp_piecewise(p)
    assert milp.stats.status == Status.OPTIMAL
    assert milp.objective == pytest.approx(lp.objective, rel=1e-6)


def test_milp_big_m_formulation_agrees():
    p = _problem("C3", sine_prices(48, seed=8))
    lp = solve_piecewise_lp(p)
    milp = solve_milp_piecewise(p, with_options(None, milp_formulation="big_m"))
    assert milp.objective == pytest.approx(lp.objective, rel=1e-6)


def test_milp_horizon_cap():
    with pytest.raises(UnsupportedSpec):
        solve_milp_piecewise(_problem("C3", sine_prices(400)))


# ---- timing and determinism

def test_time_solve_records_every_run(prices168):
    p = build_problem(D, CapabilitySpec.parse("E"), prices168)
    stats, sols = time_solve(p, repetitions=5, return_solutions=True)
    assert len(stats) == 5
    assert all(s.wall_time > 0 for s in stats)
    assert len({s.objective for s in sols}) == 1


@pytest.mark.parametrize("tag", ["C3", "B:M", "A"])
def test_bitwise_determinism(tag, prices168):
    p = build_problem(D, CapabilitySpec.parse(tag), prices168)
    a, b = solve(p), solve(p)
    assert np.array_equal(a.w_ch, b.w_ch)
    assert np.array_equal(a.w_dis, b.w_dis)
    assert np.array_equal(a.soc, b.soc)
