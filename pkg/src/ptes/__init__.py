"""Pumped thermal electricity storage: capability models, price-taker
dispatch, comparison metrics and a small capacity-expansion model."""

from .analysis import fom, rmsd_soc, rmsd_w, storage_duration_ecdf, tradeoff_records, tradeoff_table
from .capability import CapabilitySpec, check_dominance, eval_A, eval_charge_A, eval_discharge_A, gradient_A
from .design import PtesDesign, compute_cop, reference_design, storage_energy_capacity
from .dispatch import DispatchProblem, DispatchSolution, PriceSeries, build_problem, validate_solution
from .errors import InputError, PtesError
from .io import RunConfig, bundled_prices, load_config, load_lmp_csv, run_dispatch, run_full_pipeline
from .lp import SolveOptions, SolveStats, Status
from .optimizer import solve, solve_convex_b, solve_milp_piecewise, solve_model_a, solve_piecewise_lp, time_solve

__version__ = "0.1.0"
