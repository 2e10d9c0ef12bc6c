"""Monte Carlo trials, parameter sweeps and result files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from statsmodels.stats.proportion import proportion_confint, proportions_ztest

from . import __version__
from .adversary import run_attack
from .config import ScenarioConfig, lin2db, watt2dbm
from .errors import InfeasibleError, MaxIterationsError
from .framework import run_baseline, run_framework
from .precoder import constraint_report
from .scenario import generate_scenario
from .signals import generate_frame

log = logging.getLogger(__name__)

SWEEP_VARIABLES = {"p_max": "p_max_dbm", "n_rx": "n_rx"}

CSV_COLUMNS = ["sweep_value", "pd_baseline", "pd_framework",
               "pd_baseline_ci_low", "pd_baseline_ci_high",
               "pd_framework_ci_low", "pd_framework_ci_high",
               "sinr_baseline_db", "sinr_framework_db", "n_feasible", "n_trials"]


def trial_seed(base_seed: int, index: int) -> int:
    """Independent 63-bit seed for trial ``index`` of a run."""
    state = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))


@dataclass
class TrialResult:
    seed: int
    feasible: bool
    detected_framework: bool = False
    detected_baseline: bool = False
    gamma_s_framework: float = math.nan  # dB
    gamma_s_baseline: float = math.nan  # dB
    min_user_sinr: float = math.nan  # dB, worst over both arms
    max_row_power: float = math.nan  # dBm, worst over both arms
    framework_iters: int = 0
    framework_converged: bool = False
    error_framework: float = math.nan  # m, adversary's miss distance
    error_baseline: float = math.nan
    receivers_framework: tuple = ()
    receivers_baseline: tuple = ()
    gd_monotone: bool = True
    scoring_disagreements: int = 0
    failure: str = ""

    def to_row(self) -> dict:
        d = asdict(self)
        d["receivers_framework"] = " ".join(map(str, self.receivers_framework))
        d["receivers_baseline"] = " ".join(map(str, self.receivers_baseline))
        return d


def run_trial(config: ScenarioConfig, seed: int, zero_sensing: bool = False) -> TrialResult:
    """One paired trial: baseline and framework on the same scenario, symbols and noise.

    ``zero_sensing`` removes the sensing column of both precoders before the
    attack (used for A/A checks). Solver failures are recorded, not raised.
    """
    scenario = generate_scenario(config, seed)
    frame = generate_frame(config.n_ue, config.n_samples, config.mod_order, seed)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            base = run_baseline(scenario, frame, config, seed)
            fw = run_framework(scenario, frame, config)
    except (InfeasibleError, MaxIterationsError) as exc:
        return TrialResult(seed=seed, feasible=False, failure=f"{type(exc).__name__}: {exc}")

    reports = [constraint_report(base.w_final, scenario), constraint_report(fw.w_final, scenario)]
    w_b, w_f = base.w_final, fw.w_final
    if zero_sensing:
        w_b, w_f = w_b.with_sensing_zeroed(), w_f.with_sensing_zeroed()
    att_b = run_attack(scenario, w_b, frame, config, seed)
    att_f = run_attack(scenario, w_f, frame, config, seed)
    return TrialResult(
        seed=seed,
        feasible=True,
        detected_framework=att_f.detected,
        detected_baseline=att_b.detected,
        gamma_s_framework=lin2db(fw.gamma_s),
        gamma_s_baseline=lin2db(base.gamma_s),
        min_user_sinr=lin2db(min(r["min_user_sinr"] for r in reports)),
        max_row_power=watt2dbm(max(r["max_row_power"] for r in reports)),
        framework_iters=fw.iterations,
        framework_converged=fw.converged,
        error_framework=att_f.error,
        error_baseline=att_b.error,
        receivers_framework=fw.r_final.receivers,
        receivers_baseline=base.r_final.receivers,
        gd_monotone=att_b.mse_monotone and att_f.mse_monotone,
        scoring_disagreements=fw.scoring_disagreements,
    )


def _run_one(args):
    config, seed, zero_sensing = args
    return run_trial(config, seed, zero_sensing)


def run_trials(config: ScenarioConfig, n_trials: int, base_seed: int | None = None,
               workers: int = 1, zero_sensing: bool = False) -> list[TrialResult]:
    """Trials ``0..n_trials-1`` of a run; the output order never depends on ``workers``."""
    base_seed = config.seed if base_seed is None else base_seed
    jobs = [(config, trial_seed(base_seed, i), zero_sensing) for i in range(n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs, chunksize=max(1, n_trials // (4 * workers))))
    return [_run_one(job) for job in jobs]


def wilson_interval(successes: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    if n == 0:
        return (math.nan, math.nan)
    low, high = proportion_confint(successes, n, alpha=alpha, method="wilson")
    return float(low), float(high)


def two_proportion_pvalue(x1: int, n1: int, x2: int, n2: int, alternative: str = "two-sided") -> float:
    """Pooled two-proportion z-test; 1.0 when both proportions are 0 or 1."""
    if n1 == 0 or n2 == 0:
        return math.nan
    pooled = (x1 + x2) / (n1 + n2)
    if pooled in (0.0, 1.0):
        return 1.0
    _, p = proportions_ztest([x1, x2], [n1, n2], alternative=alternative)
    return float(p)


def summarize(trials: list[TrialResult], sweep_value=None) -> dict:
    """P_D of both arms over feasible trials, with Wilson 95% intervals."""
    ok = [t for t in trials if t.feasible]
    n = len(ok)
    det_b = sum(t.detected_baseline for t in ok)
    det_f = sum(t.detected_framework for t in ok)
    lo_b, hi_b = wilson_interval(det_b, n)
    lo_f, hi_f = wilson_interval(det_f, n)
    return {
        "sweep_value": sweep_value,
        "pd_baseline": det_b / n if n else math.nan,
        "pd_framework": det_f / n if n else math.nan,
        "pd_baseline_ci_low": lo_b, "pd_baseline_ci_high": hi_b,
        "pd_framework_ci_low": lo_f, "pd_framework_ci_high": hi_f,
        "sinr_baseline_db": float(np.mean([t.gamma_s_baseline for t in ok])) if n else math.nan,
        "sinr_framework_db": float(np.mean([t.gamma_s_framework for t in ok])) if n else math.nan,
        "n_feasible": n,
        "n_trials": len(trials),
    }


@dataclass
class SweepSpec:
    variable: str
    values: list
    trials_per_point: int
    base_config: ScenarioConfig

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep variable must be one of {sorted(SWEEP_VARIABLES)}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be positive")
        for v in self.values:
            self.config_for(v)  # validates the range

    def config_for(self, value) -> ScenarioConfig:
        field_name = SWEEP_VARIABLES[self.variable]
        value = int(value) if self.variable == "n_rx" else float(value)
        return self.base_config.replace(**{field_name: value})


@dataclass
class SweepTable:
    rows: list
    metadata: dict = field(default_factory=dict)
    trials: dict = field(default_factory=dict)  # sweep value -> list[TrialResult]

    def to_json(self) -> str:
        return json.dumps({"metadata": self.metadata, "rows": self.rows}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SweepTable":
        data = json.loads(text)
        return cls(rows=data["rows"], metadata=data["metadata"])


def run_sweep(spec: SweepSpec, workers: int = 1, base_seed: int | None = None) -> SweepTable:
    """P_D and sensing SINR of both arms at each sweep value.

    Every sweep value reuses the same trial seeds, so points differ only in
    the swept parameter.
    """
    base_seed = spec.base_config.seed if base_seed is None else base_seed
    rows, trials = [], {}
    for value in spec.values:
        cfg = spec.config_for(value)
        res = run_trials(cfg, spec.trials_per_point, base_seed, workers)
        trials[value] = res
        rows.append(summarize(res, value))
        log.info("sweep %s=%s: %s", spec.variable, value, rows[-1])
    meta = {"variable": spec.variable, "values": list(spec.values),
            "trials_per_point": spec.trials_per_point, "seed": base_seed,
            "config_hash": spec.base_config.config_hash(), "config": spec.base_config.to_dict(),
            "version": __version__}
    return SweepTable(rows=rows, metadata=meta, trials=trials)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.10g}"
    return str(v)


def table_csv(rows: list, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def emit_results(table: SweepTable, path, fmt: str | None = None) -> Path:
    """Write ``table`` as CSV or JSON; the format defaults to the file suffix."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    text = table_csv(table.rows) if fmt == "csv" else table.to_json()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def emit_trials(trials: list[TrialResult], path) -> Path:
    """Per-trial CSV, one row per TrialResult."""
    path = Path(path)
    rows = [t.to_row() for t in trials]
    columns = list(TrialResult.__dataclass_fields__)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table_csv(rows, columns))
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path
