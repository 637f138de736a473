"""Price ingestion, run configuration, artifact files and run orchestration."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .analysis import storage_duration_ecdf, tradeoff_records, tradeoff_table
from .capability import CapabilitySpec
from .design import PtesDesign, design_from_config, reference_design
from .dispatch import DispatchSolution, PriceSeries, build_problem
from .errors import InputError, MissingHours, NonMonotonicTimestamps, NonNumericPrice
from .lp import SolveOptions, SolveStats, Status
from .optimizer import time_solve

log = logging.getLogger(__name__)

PRICE_COLUMNS = ("timestamp", "price_usd_per_mwh")
SOLUTION_COLUMNS = ("hour", "price_usd_per_mwh", "w_ch_kw", "w_dis_kw", "soc_pct")
DEFAULT_MODELS = ("A", "B:M", "B:H", "C2:50", "C2:60", "C2:75", "C3", "C10", "C30", "D", "D2", "E")


# ------------------------------------------------------------------ prices


def load_lmp_csv(path: str | Path, policy: str = "reject", label: str | None = None) -> PriceSeries:
    """Read an hourly LMP file with header ``timestamp,price_usd_per_mwh``.

    ``policy="reject"`` fails on any missing hour; ``"interpolate"`` fills
    gaps (and blank prices) linearly and records the count in ``filled``.
    Errors name the first offending data row (1-based, header excluded).
    """
    if policy not in ("reject", "interpolate"):
        raise InputError(f"unknown missing-data policy {policy!r}")
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{path}: cannot read price file ({exc})") from exc
    if tuple(c.strip() for c in df.columns) != PRICE_COLUMNS:
        raise InputError(f"{path}: header must be {','.join(PRICE_COLUMNS)}")
    df.columns = list(PRICE_COLUMNS)
    if df.empty:
        raise InputError(f"{path}: no data rows")
    raw = df["price_usd_per_mwh"].str.strip()
    blank = raw == ""
    # python float parsing is exact; pandas' fast parser can be off by an ulp
    values = raw.map(_to_float)
    bad = values.isna() & ~blank
    if bad.any():
        row = int(np.argmax(bad.to_numpy()))
        raise NonNumericPrice(f"{path}: row {row + 1}: price {raw.iloc[row]!r} is not a number")
    try:
        stamps = pd.to_datetime(df["timestamp"].str.strip(), format="ISO8601", utc=True)
    except (ValueError, TypeError) as exc:
        raise InputError(f"{path}: unreadable timestamp ({exc})") from exc
    step = stamps.diff().dt.total_seconds().to_numpy()[1:] / 3600.0
    back = np.nonzero(step <= 0)[0]
    if back.size:
        row = int(back[0]) + 2
        raise NonMonotonicTimestamps(f"{path}: row {row}: timestamp {df['timestamp'].iloc[row - 1]} does not advance")
    odd = np.nonzero(np.abs(step - np.round(step)) > 1e-9)[0]
    if odd.size:
        raise InputError(f"{path}: row {int(odd[0]) + 2}: timestamps are not on an hourly grid")
    gaps = np.nonzero(step > 1)[0]
    prices = values.to_numpy(dtype=float)
    filled = 0
    if policy == "reject":
        if gaps.size:
            g = int(gaps[0])
            raise MissingHours(
                f"{path}: row {g + 2}: {int(step[g]) - 1} missing hour(s) after {df['timestamp'].iloc[g]}"
            )
        if blank.any():
            row = int(np.argmax(blank.to_numpy())) + 1
            raise MissingHours(f"{path}: row {row}: missing price")
    else:
        full = pd.date_range(stamps.iloc[0], stamps.iloc[-1], freq="h")
        series = pd.Series(prices, index=stamps).reindex(full)
        filled = int(series.isna().sum())
        series = series.interpolate(method="linear", limit_direction="both")
        if series.isna().any():
            raise MissingHours(f"{path}: no price to interpolate from")
        prices = series.to_numpy(dtype=float)
    return PriceSeries(label or path.stem, prices, filled=filled)


def _to_float(text: str) -> float:
    if not text:
        return np.nan
    try:
        v = float(text)
    except ValueError:
        return np.nan
    return v if np.isfinite(v) else np.nan


def bundled_price_path(name: str = "synthetic_168h") -> Path:
    return Path(str(resources.files("ptes") / "data" / f"{name}.csv"))


def bundled_prices(name: str = "synthetic_168h") -> PriceSeries:
    """Price series shipped with the package."""
    return load_lmp_csv(bundled_price_path(name), label=name)


def write_price_csv(series: PriceSeries, path: str | Path, start: str = "2021-01-01T00:00:00") -> Path:
    path = Path(path)
    stamps = pd.date_range(pd.Timestamp(start), periods=len(series), freq="h")
    pd.DataFrame({"timestamp": stamps.strftime("%Y-%m-%dT%H:%M:%S"), "price_usd_per_mwh": series.prices}).to_csv(
        path, index=False
    )
    return path


def synthetic_prices(hours: int = 168, seed: int = 0, label: str | None = None) -> PriceSeries:
    """Day-ahead-like series: daily and weekly shape, seasonal drift, AR(1)
    noise and a few price spikes."""
    rng = np.random.default_rng(seed)
    t = np.arange(hours)
    day = t % 24
    daily = 9.0 * np.exp(-((day - 18) ** 2) / 6.0) + 5.0 * np.exp(-((day - 8) ** 2) / 4.0) - 6.0 * np.exp(
        -((day - 3) ** 2) / 8.0
    )
    weekly = np.where((t // 24) % 7 >= 5, -5.0, 0.0)
    seasonal = 6.0 * np.cos(2 * np.pi * (t / 24.0 - 200) / 365.0)
    noise = np.zeros(hours)
    eps = rng.normal(0.0, 2.5, hours)
    for i in range(1, hours):
        noise[i] = 0.8 * noise[i - 1] + eps[i]
    spikes = np.where(rng.random(hours) < 0.01, rng.gamma(2.0, 30.0, hours), 0.0)
    prices = 32.0 + daily + weekly + seasonal + noise + spikes
    return PriceSeries(label or f"synthetic_{hours}h_s{seed}", prices)


# ------------------------------------------------------------------ configs


@dataclass
class PriceInput:
    label: str
    path: str | None = None
    hours: int = 168  # synthetic only
    seed: int = 0  # synthetic only

    def load(self, policy: str) -> PriceSeries:
        if self.path is not None:
            return load_lmp_csv(self.path, policy, self.label)
        return synthetic_prices(self.hours, self.seed, self.label)


@dataclass
class RunConfig:
    design: PtesDesign = field(default_factory=reference_design)
    models: list[str] = field(default_factory=lambda: list(DEFAULT_MODELS))
    prices: list[PriceInput] = field(default_factory=lambda: [PriceInput("synthetic_168h", str(bundled_price_path()))])
    options: SolveOptions = field(default_factory=SolveOptions)
    out_dir: str = "out"
    repetitions: int = 5
    policy: str = "reject"
    reference: str = "A"
    speed_weight: float = 10.0
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.models:
            raise InputError("the config lists no models")
        if not self.prices:
            raise InputError("the config lists no price inputs")
        for m in self.models:
            CapabilitySpec.parse(m)
        if self.repetitions < 1:
            raise InputError("repetitions must be >= 1")

    def to_dict(self) -> dict:
        opts = asdict(self.options)
        opts["initial_cut_points"] = list(opts["initial_cut_points"])
        return {
            "design": asdict(self.design),
            "models": list(self.models),
            "prices": [asdict(p) for p in self.prices],
            "options": opts,
            "repetitions": self.repetitions,
            "policy": self.policy,
            "reference": self.reference,
            "speed_weight": self.speed_weight,
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the config."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path: str | Path) -> RunConfig:
    """YAML or JSON run config. Relative price paths resolve against the
    config file's directory and must exist."""
    path = Path(path)
    try:
        text = path.read_text()
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise InputError(f"{path}: not valid {path.suffix.lstrip('.') or 'YAML'} ({exc})") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: config must be a mapping")
    try:
        return config_from_dict(doc, base=path.parent)
    except (TypeError, KeyError) as exc:
        raise InputError(f"{path}: malformed config ({exc})") from exc


def config_from_dict(doc: dict, base: Path | None = None) -> RunConfig:
    base = base or Path(".")
    design = design_from_config(doc["design"]).design if "design" in doc else reference_design()
    prices = []
    for item in doc.get("prices", [{"label": "synthetic_168h", "path": str(bundled_price_path())}]):
        p = PriceInput(**item)
        if p.path is not None:
            full = (base / p.path).resolve()
            if not full.exists():
                raise InputError(f"price file {full} does not exist")
            p.path = str(full)
        prices.append(p)
    known = {f.name for f in fields(SolveOptions)}
    opt_doc = dict(doc.get("options", {}))
    unknown = set(opt_doc) - known
    if unknown:
        raise InputError(f"unknown solver options {sorted(unknown)}")
    if "initial_cut_points" in opt_doc:
        opt_doc["initial_cut_points"] = tuple(float(v) for v in opt_doc["initial_cut_points"])
    return RunConfig(
        design=design,
        models=[str(m) for m in doc.get("models", DEFAULT_MODELS)],
        prices=prices,
        options=SolveOptions(**opt_doc),
        out_dir=str(doc.get("out_dir", "out")),
        repetitions=int(doc.get("repetitions", 5)),
        policy=str(doc.get("policy", "reject")),
        reference=str(doc.get("reference", "A")),
        speed_weight=float(doc.get("speed_weight", 10.0)),
        raw=doc,
    )


# ---------------------------------------------------------------- artifacts


def safe_tag(tag: str) -> str:
    return tag.replace(":", "-").replace(",", "_")


def write_solution_csv(solution: DispatchSolution, prices: PriceSeries | np.ndarray, path: str | Path) -> Path:
    p = prices.prices if isinstance(prices, PriceSeries) else np.asarray(prices)
    df = pd.DataFrame({
        "hour": np.arange(solution.horizon),
        "price_usd_per_mwh": p,
        "w_ch_kw": solution.w_ch,
        "w_dis_kw": solution.w_dis,
        "soc_pct": solution.soc_pct,
    })
    path = Path(path)
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_solution_csv(path: str | Path, tag: str | None = None) -> tuple[DispatchSolution, np.ndarray]:
    df = pd.read_csv(path, float_precision="round_trip")
    if tuple(df.columns) != SOLUTION_COLUMNS:
        raise InputError(f"{path}: unexpected columns {list(df.columns)}")
    w_ch = df.w_ch_kw.to_numpy(dtype=float)
    w_dis = df.w_dis_kw.to_numpy(dtype=float)
    prices = df.price_usd_per_mwh.to_numpy(dtype=float)
    sol = DispatchSolution(
        tag=tag or Path(path).stem,
        w_ch=w_ch,
        w_dis=w_dis,
        soc=df.soc_pct.to_numpy(dtype=float) / 100.0,
        objective=float(np.sum((w_dis - w_ch) * prices) * 1e-3),
    )
    return sol, prices


def write_json(obj, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Status):
        return o.value
    raise TypeError(f"cannot serialise {type(o).__name__}")


def manifest_entry(config_hash: str, tag: str, horizon: int, dataset: str, files: list[Path]) -> dict:
    return {"config_hash": config_hash, "model": tag, "horizon": horizon, "dataset": dataset,
            "files": [f.name for f in files]}


# ------------------------------------------------------------- orchestration


@dataclass
class DispatchRun:
    model: str
    dataset: str
    solution: DispatchSolution
    stats: list[SolveStats]
    files: list[Path]

    @property
    def converged(self) -> bool:
        return all(s.status == Status.OPTIMAL for s in self.stats)


def _dispatch_job(config: RunConfig, pin: PriceInput, tag: str, out: Path, digest: str) -> tuple[DispatchRun, dict]:
    series = pin.load(config.policy)
    spec = CapabilitySpec.parse(tag)
    problem = build_problem(config.design, spec, series)
    stats, sols = time_solve(problem, config.options, config.repetitions, return_solutions=True)
    sol = sols[0]
    stem = f"{safe_tag(series.label)}__{safe_tag(spec.tag)}"
    csv = write_solution_csv(sol, series, out / f"{stem}.csv")
    meta = {
        "model": spec.tag,
        "dataset": series.label,
        "horizon": len(series),
        "config_hash": digest,
        "objective_usd": sol.objective,
        "filled_hours": series.filled,
        "wall_times_s": [s.wall_time for s in stats],
        "statuses": [s.status.value for s in stats],
        "runs": [_stats_summary(s) for s in stats],
    }
    js = write_json(meta, out / f"{stem}.json")
    log.info("%s on %s: profit %.4f, median %.3fs", spec.tag, series.label, sol.objective,
             float(np.median(meta["wall_times_s"])))
    entry = manifest_entry(digest, spec.tag, len(series), series.label, [csv, js])
    return DispatchRun(spec.tag, series.label, sol, stats, [csv, js]), entry


def run_dispatch(config: RunConfig, out_dir: str | Path | None = None, workers: int = 1) -> list[DispatchRun]:
    """Solve every (model, price series) pair ``repetitions`` times and write
    ``<dataset>__<model>.csv`` plus ``.json`` metadata for each pair.

    ``workers > 1`` fans the pairs out over processes. Each job writes only its
    own files; wall times then include contention between jobs.
    """
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = config.digest()
    # fail fast on unreadable inputs before any solve starts
    for pin in config.prices:
        pin.load(config.policy)
    jobs = [(pin, tag) for pin in config.prices for tag in config.models]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_dispatch_job, config, pin, tag, out, digest) for pin, tag in jobs]
            results = [f.result() for f in futures]
    else:
        results = [_dispatch_job(config, pin, tag, out, digest) for pin, tag in jobs]
    runs = [r for r, _ in results]
    write_json({"config_hash": digest, "config": config.to_dict(), "entries": [e for _, e in results]},
               out / "manifest.json")
    return runs


def _stats_summary(s: SolveStats) -> dict:
    d = s.as_dict()
    # histories can be long; keep their length and final value
    for key in ("objective_history", "violation_history"):
        hist = d.pop(key)
        d[f"{key}_len"] = len(hist)
        d[f"{key}_last"] = hist[-1] if hist else None
    return d


def analyze_directory(run_dir: str | Path, design: PtesDesign | None = None, reference: str = "A",
                      speed_weight: float = 10.0, out_dir: str | Path | None = None) -> dict[str, pd.DataFrame]:
    """Trade-off, FoM and ECDF tables from the solution CSVs and timing JSON
    of a dispatch run directory."""
    run_dir = Path(run_dir)
    out = Path(out_dir or run_dir)
    out.mkdir(parents=True, exist_ok=True)
    design = design or reference_design()
    metas = sorted(run_dir.glob("*__*.json"))
    if not metas:
        raise InputError(f"{run_dir}: no solution metadata found")
    by_dataset: dict[str, dict[str, tuple[DispatchSolution, list[float]]]] = {}
    for mpath in metas:
        meta = json.loads(mpath.read_text())
        sol, _ = read_solution_csv(mpath.with_suffix(".csv"), meta["model"])
        by_dataset.setdefault(meta["dataset"], {})[meta["model"]] = (sol, meta["wall_times_s"])
    records, ecdf_rows = [], []
    for dataset, entries in by_dataset.items():
        if reference not in entries:
            raise InputError(f"dataset {dataset}: reference model {reference} was not run")
        sols = {k: v[0] for k, v in entries.items()}
        times = {k: v[1] for k, v in entries.items()}
        for tag, sol in sols.items():
            eff = build_problem(design, CapabilitySpec.parse(tag), PriceSeries(dataset, np.zeros(sol.horizon))).design
            ecdf = storage_duration_ecdf(sol, eff, cyclic=True, tol=1e-4)
            ecdf_rows.append(ecdf.to_frame().assign(dataset=dataset, model=tag))
        records += tradeoff_records(sols, times, design, dataset, reference, speed_weight)
    rec = pd.DataFrame([asdict(r) for r in records])
    table = tradeoff_table(records)
    fom = rec.groupby(["dataset", "model"], sort=False)[["fom_equal", "fom_speed"]].mean().reset_index()
    ecdf = pd.concat(ecdf_rows, ignore_index=True)
    rec.to_csv(out / "tradeoff_records.csv", index=False, lineterminator="\n")
    table.to_csv(out / "tradeoff.csv", index=False, lineterminator="\n")
    fom.to_csv(out / "fom.csv", index=False, lineterminator="\n")
    ecdf.to_csv(out / "ecdf.csv", index=False, lineterminator="\n")
    return {"records": rec, "tradeoff": table, "fom": fom, "ecdf": ecdf}


def run_full_pipeline(config: RunConfig, out_dir: str | Path | None = None, plots: bool = True,
                      workers: int = 1) -> dict:
    """Dispatch, then analysis, then plots. Returns the bundle contents."""
    out = Path(out_dir or config.out_dir)
    runs = run_dispatch(config, out, workers)
    models = {r.model for r in runs}
    tables = {}
    if config.reference in models:
        tables = analyze_directory(out, config.design, config.reference, config.speed_weight)
    else:
        log.warning("reference model %s not in the run; skipping trade-off analysis", config.reference)
    figures = []
    if plots and tables:
        from . import plots as _plots

        figures.append(_plots.tradeoff_scatter(tables["records"], out / "tradeoff.svg"))
        figures.append(_plots.ecdf_plot(tables["ecdf"], out / "ecdf.svg"))
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["bundle"] = sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    write_json(manifest, out / "manifest.json")
    return {"runs": runs, "tables": tables, "figures": figures, "out_dir": out}
