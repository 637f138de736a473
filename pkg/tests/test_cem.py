import numpy as np
import pandas as pd
import pytest

from ptes.cem import (
    PTES_RATIO,
    CemSystem,
    Line,
    RepresentativePeriods,
    Resource,
    build_cem,
    chain_boundary_states,
    cluster_weeks,
    cost_deltas,
    load_system,
    mean_ptes_soc,
    save_system,
    solve_cem,
    solve_cem_specs,
    toy_system,
    validate_cem,
)
from ptes.errors import InconsistentNetwork, InputError, UnsupportedSpec

HOURS = 8760


def one_zone(cf=None, demand=10.0, storage=False, ptes_energy_cost=3000.0):
    t = np.arange(HOURS)
    if cf is None:
        cf = np.ones(HOURS)
    res = [Resource("wind_Z", "wind", "Z", power_cost=1000.0, var_cost=2.0, cf_column="wind_Z")]
    if storage:
        res.append(Resource("ptes_Z", "ptes", "Z", power_cost=500.0, energy_cost=ptes_energy_cost))
    return CemSystem(
        zones=["Z"],
        lines=[],
        resources=res,
        demand=pd.DataFrame({"Z": np.full(HOURS, demand) + 0 * t}),
        cf=pd.DataFrame({"wind_Z": cf}),
    )


# ---- representative weeks

def test_identical_weeks_one_cluster():
    week = np.sin(np.arange(168) / 7.0)
    series = np.tile(week, 53)[:HOURS]
    p = cluster_weeks(series, 1)
    assert p.weights.tolist() == [52]
    assert p.assignment.tolist() == [0] * 52


def test_alternating_weeks_two_clusters():
    a, b = np.zeros(168), np.ones(168)
    series = np.concatenate([a if j % 2 == 0 else b for j in range(53)])[:HOURS]
    p = cluster_weeks(series, 2)
    assert sorted(p.weights.tolist()) == [26, 26]
    assert p.weights.sum() == 52
    assert np.all(p.assignment[::2] == p.assignment[0])
    assert np.all(p.assignment[1::2] == p.assignment[1])
    assert p.assignment[0] != p.assignment[1]


@pytest.mark.parametrize("k", [1, 3, 7])
def test_toy_clustering_weights(k):
    p = cluster_weeks(toy_system().series(), k)
    assert p.weights.sum() == 52
    assert np.all(np.diff(p.rep_weeks) > 0)
    assert np.array_equal(p.assignment[p.rep_weeks], np.arange(k))


def test_clustering_input_checks():
    with pytest.raises(InputError):
        cluster_weeks(np.zeros(1000), 2)
    with pytest.raises(InputError):
        cluster_weeks(np.zeros(HOURS), 0)


def test_period_validation():
    with pytest.raises(InputError):
        RepresentativePeriods(np.array([0]), np.array([51]), np.zeros(52, int))
    full = RepresentativePeriods.full_year()
    assert full.n_periods == 52


# ---- system checks

def test_system_rejects_bad_network():
    with pytest.raises(InconsistentNetwork):
        CemSystem(["A", "A"], [], [], pd.DataFrame({"A": [1.0]}), pd.DataFrame())
    with pytest.raises(InconsistentNetwork):
        CemSystem(["A"], [Line("L", "A", "B", 1.0)], [], pd.DataFrame({"A": [1.0]}), pd.DataFrame())
    with pytest.raises(InputError):
        Resource("x", "coal", "A", 1.0)


def test_d2_has_no_cem_form():
    sysm = one_zone()
    with pytest.raises(UnsupportedSpec):
        build_cem(sysm, cluster_weeks(sysm.series(), 1), "D2")


# ---- small solves with known answers

def test_constant_wind_closed_form():
    # cf = 1 everywhere: build exactly the demand, pay capacity plus energy
    sysm = one_zone()
    per = RepresentativePeriods(np.array([0]), np.array([52]), np.zeros(52, int))
    prob = build_cem(sysm, per, "E")
    sol = solve_cem(prob)
    assert sol.total_cost == pytest.approx(10 * 1000.0 + 2.0 * 10 * 52 * 168, rel=1e-9)
    rep = validate_cem(prob, sol)
    assert rep["balance"] < 1e-9


def test_alternating_wind_needs_storage():
    # wind on in even hours only: storage carries half the demand
    cf = (np.arange(HOURS) % 2 == 0).astype(float)
    sysm = one_zone(cf=cf, storage=True)
    per = RepresentativePeriods(np.array([0]), np.array([52]), np.zeros(52, int))
    prob = build_cem(sysm, per, "E")
    sol = solve_cem(prob)
    caps = sol.capacities.set_index("resource")
    d = sysm.ptes
    a_ch, a_dis = d.alpha_ch * d.eta_mg, d.alpha_dis / d.eta_mg
    # empty after each discharge hour: one leakage step between charge and use
    ch = 10.0 * a_dis / ((1 - d.gamma) * a_ch)
    assert caps.loc["ptes_Z", "power_mw"] == pytest.approx(max(10.0, ch / PTES_RATIO), rel=1e-6)
    assert caps.loc["ptes_Z", "energy_mwh"] == pytest.approx(a_ch * ch, rel=1e-6)
    assert sol.cost_breakdown["nse"] == pytest.approx(0.0, abs=1e-6)
    chained, solved = chain_boundary_states(prob, sol, "ptes_Z")
    np.testing.assert_allclose(chained, solved, atol=1e-6)


def test_capability_models_cost_more_than_unconstrained():
    cf = (np.arange(HOURS) % 24 < 12).astype(float)
    sysm = one_zone(cf=cf, storage=True)
    per = RepresentativePeriods(np.array([0]), np.array([52]), np.zeros(52, int))
    sols, probs = solve_cem_specs(sysm, per, ["E", "C3", "D"], return_problems=True)
    e, c3, d = (sols[t].total_cost for t in ("E", "C3", "D"))
    assert e <= c3 * (1 + 1e-3)
    assert c3 <= d * (1 + 1e-3)
    for tag in ("C3", "D"):
        rep = validate_cem(probs[tag], sols[tag])
        assert rep["capability"] <= 1e-6
        assert rep["balance"] <= 1e-6
    soc = mean_ptes_soc(probs["D"], sols["D"])
    assert 0.0 <= soc <= 100.0


# ---- reporting and IO

def test_cost_deltas():
    df = cost_deltas({"E": 100.0, "D": 110.0}).set_index("spec")
    assert df.loc["E", "delta_pct"] == 0.0
    assert df.loc["D", "delta_pct"] == pytest.approx(10.0)
    assert cost_deltas({}).empty


def test_system_round_trip(tmp_path):
    sysm = toy_system(hours=HOURS)
    path = save_system(sysm, tmp_path / "sys")
    back = load_system(path)
    assert back.zones == sysm.zones
    assert [r.name for r in back.resources] == [r.name for r in sysm.resources]
    np.testing.assert_allclose(back.demand.to_numpy(), sysm.demand.to_numpy(), rtol=1e-12)
    np.testing.assert_allclose(back.cf.to_numpy(), sysm.cf.to_numpy(), rtol=1e-12)
    assert back.ptes.gamma == sysm.ptes.gamma


@pytest.mark.slow
def test_part_load_model_costs_at_least_bm():
    cf = (np.arange(HOURS) % 24 < 12).astype(float)
    sysm = one_zone(cf=cf, storage=True)
    per = RepresentativePeriods(np.array([0]), np.array([52]), np.zeros(52, int))
    sols, probs = solve_cem_specs(sysm, per, ["E", "B:M", "A"], return_problems=True)
    assert sols["E"].total_cost <= sols["B:M"].total_cost * (1 + 1e-3)
    assert sols["B:M"].total_cost <= sols["A"].total_cost * (1 + 1e-3)
    rep = validate_cem(probs["A"], sols["A"])
    assert rep["capability"] <= 1e-3
