"""Experiment orchestration: ground-truth tables, budgeted benchmarks,
probability-of-success calibration and the fade-out threshold report.

All outputs are CSV files with fixed column orders. Every replicate draws
from its own stream, derived by hashing the master seed with the cell key,
so results do not depend on worker count or scheduling.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .bandits import Environment, run_algorithm
from .confidence import PS_EDGES, PosteriorSet, bin_success_calibration, probability_of_success
from .episim import (
    SCENARIO_KEYS,
    Scenario,
    SyntheticEnvironment,
    default_scenario,
    enumerate_strategies,
    make_environment,
    scenario_from_mapping,
)
from .errors import (
    BudgetTooSmall,
    ConfigError,
    DegeneratePosterior,
    EpibanditError,
    MissingGroundTruth,
    MissingRecords,
    NoEstablishedSample,
)
from .fadeout import OffspringModel, extinction_probability, fade_out_threshold

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "GroundTruth",
    "load_config",
    "stream_for",
    "cmd_ground_truth",
    "cmd_benchmark",
    "cmd_calibration",
    "cmd_threshold",
    "read_ground_truth",
    "read_run_records",
    "GROUND_TRUTH_COLUMNS",
    "SAMPLE_COLUMNS",
    "BENCHMARK_COLUMNS",
    "SUMMARY_COLUMNS",
    "CALIBRATION_COLUMNS",
]

ALGORITHM_NAMES = {
    "uniform": "uniform",
    "sr": "successive_rejects",
    "bayesgap": "bayesgap",
    "ttts": "ttts",
}

GROUND_TRUTH_COLUMNS = ("r0", "strategy_index", "n_runs", "n_established", "mean_outcome", "std_outcome")
SAMPLE_COLUMNS = ("r0", "strategy_index", "run", "outcome", "cumulative_infections", "established")
BENCHMARK_COLUMNS = ("algorithm", "r0", "budget", "replicate", "recommended_arm", "correct",
                     "p_success", "pulls_json", "wall_ms")
SUMMARY_COLUMNS = ("algorithm", "r0", "budget", "replicates", "successes", "success_rate",
                   "no_recommendation")
CALIBRATION_COLUMNS = ("r0", "bin_lower", "bin_upper", "trials", "successes", "empirical_rate",
                       "cp_lower", "cp_upper")

GROUND_TRUTH_FILE = "ground_truth.csv"
SAMPLES_FILE = "ground_truth_samples.csv"
BENCHMARK_FILE = "benchmark_runs.csv"
SUMMARY_FILE = "benchmark_summary.csv"
CALIBRATION_FILE = "calibration.csv"

DEFAULT_R0 = (1.4, 1.6, 1.8, 2.0, 2.2, 2.4)
DEFAULT_BUDGETS = tuple(range(32, 500, 32)) + (500,)
CALIBRATION_EDGES = (0.0,) + PS_EDGES


@dataclass
class ExperimentConfig:
    scenario: str | None = None
    r0_list: tuple[float, ...] = DEFAULT_R0
    budgets: tuple[int, ...] = DEFAULT_BUDGETS
    replicates: int = 100
    algorithms: tuple[str, ...] = ("uniform", "sr", "bayesgap", "ttts")
    omega: float = 0.5
    epsilon: float = 0.001
    dispersion: float = 0.5
    cutoff: float = 1e-10
    controlled_fraction: float = 0.0
    master_seed: int = 0
    output_dir: str = "results"
    ground_truth_runs: int = 200
    environment: str = "surrogate"
    p_success_algorithms: tuple[str, ...] = ("ttts",)
    workers: int = 1
    record_timing: bool = False

    def __post_init__(self):
        self.r0_list = tuple(float(r) for r in self.r0_list)
        self.budgets = tuple(int(b) for b in self.budgets)
        self.algorithms = tuple(self.algorithms)
        self.p_success_algorithms = tuple(self.p_success_algorithms)
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not self.budgets or list(self.budgets) != sorted(set(self.budgets)) or self.budgets[0] < 1:
            raise ConfigError("budgets must be a nonempty strictly ascending list of positive integers")
        if not self.r0_list:
            raise ConfigError("r0_list must be nonempty")
        unknown = [a for a in self.algorithms + self.p_success_algorithms if a not in ALGORITHM_NAMES]
        if unknown:
            raise ConfigError(f"unknown algorithm(s) {unknown}; choose from {sorted(ALGORITHM_NAMES)}")
        if not 0.0 < self.omega <= 1.0:
            raise ConfigError("omega must lie in (0, 1]")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be nonnegative")
        if self.environment not in ("surrogate", "synthetic"):
            raise ConfigError("environment must be 'surrogate' or 'synthetic'")
        if self.ground_truth_runs < 2:
            raise ConfigError("ground_truth_runs must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @property
    def out(self) -> Path:
        return Path(self.output_dir)


CONFIG_KEYS = frozenset(f.name for f in dataclasses.fields(ExperimentConfig))
# keys shared by both: they shape the establishment threshold of the scenario
_SHARED_KEYS = ("dispersion", "cutoff", "controlled_fraction")


def load_config(path: str | Path | None = None, **overrides) -> tuple[ExperimentConfig, Scenario]:
    """Read a flat YAML file holding experiment keys and/or scenario keys.

    ``scenario`` may point to a separate scenario file; inline scenario keys
    override it. Unknown keys raise :class:`ConfigError`.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a key-value mapping")
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})

    unknown = set(data) - CONFIG_KEYS - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    exp_kwargs = {k: v for k, v in data.items() if k in CONFIG_KEYS}
    scen_kwargs = {k: v for k, v in data.items() if k in SCENARIO_KEYS and k not in CONFIG_KEYS}
    try:
        config = ExperimentConfig(**exp_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    if config.scenario:
        scen_path = Path(config.scenario)
        if path is not None and not scen_path.is_absolute():
            scen_path = Path(path).parent / scen_path
        try:
            base = yaml.safe_load(scen_path.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read scenario {scen_path}: {exc}") from exc
        base.update(scen_kwargs)
        scenario = scenario_from_mapping(base)
    else:
        scenario = default_scenario(**scen_kwargs)
    scenario = dataclasses.replace(scenario, **{k: getattr(config, k) for k in _SHARED_KEYS})
    return config, scenario


def stream_for(master_seed: int, *key) -> np.random.Generator:
    """Independent generator for ``key`` under ``master_seed`` (SHA-256 derived)."""
    text = "|".join([str(int(master_seed))] + [repr(k) for k in key])
    digest = hashlib.sha256(text.encode()).digest()
    return np.random.default_rng(np.random.SeedSequence(int.from_bytes(digest[:16], "little")))


def _pool_map(func: Callable, tasks: Sequence, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=1))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def _read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ground truth --------------------------------------------------------------

@dataclass(frozen=True)
class GroundTruthRow:
    r0: float
    strategy_index: int
    n_runs: int
    n_established: int
    mean_outcome: float
    std_outcome: float


@dataclass
class GroundTruth:
    rows: list[GroundTruthRow]

    def r0_values(self) -> list[float]:
        return sorted({r.r0 for r in self.rows})

    def for_r0(self, r0: float) -> list[GroundTruthRow]:
        rows = sorted((r for r in self.rows if math.isclose(r.r0, r0, rel_tol=0, abs_tol=1e-9)),
                      key=lambda r: r.strategy_index)
        if not rows:
            raise MissingGroundTruth(f"no ground truth for r0={r0}")
        return rows

    def best_arm(self, r0: float) -> int:
        """Strategy with the lowest mean established outcome (lowest index on ties)."""
        rows = self.for_r0(r0)
        means = [r.mean_outcome if r.n_established and not math.isnan(r.mean_outcome) else math.inf
                 for r in rows]
        if all(math.isinf(m) for m in means):
            raise MissingGroundTruth(f"no established runs at r0={r0}")
        return rows[int(np.argmin(means))].strategy_index

    def synthetic_environment(self, r0: float) -> SyntheticEnvironment:
        rows = self.for_r0(r0)
        means, sigmas, probs = [], [], []
        for r in rows:
            usable = r.n_established >= 2 and r.std_outcome > 0
            means.append(r.mean_outcome if usable else 1.0)
            sigmas.append(r.std_outcome if usable else 1e-3)
            probs.append(r.n_established / r.n_runs if usable else 0.0)
        return SyntheticEnvironment(np.array(means), np.array(sigmas), np.array(probs))


def _ground_truth_cell(task):
    scenario, r0, strategy_index, n_runs, master_seed = task
    env = make_environment(scenario.with_r0(r0))
    rng = stream_for(master_seed, "ground-truth", r0, strategy_index)
    results = [env.simulate(strategy_index, rng) for _ in range(n_runs)]
    return r0, strategy_index, results


def compute_ground_truth(config: ExperimentConfig, scenario: Scenario):
    """Run every strategy ``ground_truth_runs`` times at each R0."""
    tasks = [(scenario, r0, k, config.ground_truth_runs, config.master_seed)
             for r0 in config.r0_list for k in range(len(enumerate_strategies()))]
    cells = _pool_map(_ground_truth_cell, tasks, config.workers)
    cells.sort(key=lambda c: (c[0], c[1]))
    rows, samples = [], []
    for r0, k, results in cells:
        est = np.array([r.outcome for r in results if r.established])
        rows.append(GroundTruthRow(
            r0, k, len(results), len(est),
            float(est.mean()) if len(est) else math.nan,
            float(est.std(ddof=1)) if len(est) > 1 else math.nan))
        samples.extend((r0, k, i, r.outcome, r.cumulative_infections, r.established)
                       for i, r in enumerate(results))
    return GroundTruth(rows), samples


def cmd_ground_truth(config: ExperimentConfig, scenario: Scenario) -> GroundTruth:
    truth, samples = compute_ground_truth(config, scenario)
    _write_csv(config.out / GROUND_TRUTH_FILE, GROUND_TRUTH_COLUMNS,
               (dataclasses.astuple(r) for r in truth.rows))
    _write_csv(config.out / SAMPLES_FILE, SAMPLE_COLUMNS, samples)
    return truth


def read_ground_truth(path: str | Path) -> GroundTruth:
    path = Path(path)
    if path.is_dir():
        path = path / GROUND_TRUTH_FILE
    if not path.exists():
        raise MissingGroundTruth(f"ground-truth table {path} not found; run `ground-truth` first")
    rows = [GroundTruthRow(float(r["r0"]), int(r["strategy_index"]), int(r["n_runs"]),
                           int(r["n_established"]), float(r["mean_outcome"]), float(r["std_outcome"]))
            for r in _read_csv(path)]
    return GroundTruth(rows)


# benchmark -----------------------------------------------------------------

@dataclass
class RunRecord:
    algorithm: str
    r0: float
    budget: int
    replicate: int
    recommended_arm: int
    correct: bool
    p_success: float | None
    accepted_pulls: list[int] = field(default_factory=list)
    wall_ms: float | None = None

    def row(self) -> tuple:
        return (self.algorithm, self.r0, self.budget, self.replicate, self.recommended_arm,
                self.correct, self.p_success,
                json.dumps(self.accepted_pulls, separators=(",", ":")), self.wall_ms)


def run_replicate(env: Environment, algorithm: str, budget: int, rng: np.random.Generator,
                  best_arm: int, *, omega: float = 0.5, epsilon: float = 0.001,
                  with_p_success: bool = False) -> tuple[int, bool, float | None, list[int]]:
    """One seeded execution; ``-1`` marks runs that could not recommend an arm."""
    try:
        rec = run_algorithm(ALGORITHM_NAMES[algorithm], env, budget, rng, omega=omega, epsilon=epsilon)
    except (BudgetTooSmall, NoEstablishedSample):
        return -1, False, None, []
    p_success = None
    if with_p_success:
        try:
            p_success = probability_of_success(PosteriorSet(rec.run.posteriors(), rec.arm))
        except DegeneratePosterior:
            p_success = None
    return rec.arm, rec.arm == best_arm, p_success, rec.run.counts()


def _benchmark_cell(task):
    (algorithm, r0, budget, env, best_arm, replicates, master_seed,
     omega, epsilon, with_ps, timing) = task
    records = []
    for i in range(replicates):
        rng = stream_for(master_seed, "benchmark", algorithm, r0, budget, i)
        t0 = time.perf_counter()
        arm, correct, ps, counts = run_replicate(env, algorithm, budget, rng, best_arm, omega=omega,
                                                 epsilon=epsilon, with_p_success=with_ps)
        wall = round((time.perf_counter() - t0) * 1000.0, 3) if timing else None
        records.append(RunRecord(algorithm, r0, budget, i, arm, correct, ps, counts, wall))
    return records


def benchmark_environment(config: ExperimentConfig, scenario: Scenario, truth: GroundTruth,
                          r0: float) -> Environment:
    if config.environment == "synthetic":
        return truth.synthetic_environment(r0)
    return make_environment(scenario.with_r0(r0))


def cmd_benchmark(config: ExperimentConfig, scenario: Scenario,
                  truth: GroundTruth | None = None) -> list[RunRecord]:
    if truth is None:
        truth = read_ground_truth(config.out / GROUND_TRUTH_FILE)
    envs, best = {}, {}
    for r0 in config.r0_list:
        best[r0] = truth.best_arm(r0)
        envs[r0] = benchmark_environment(config, scenario, truth, r0)
    tasks = [(alg, r0, budget, envs[r0], best[r0], config.replicates, config.master_seed,
              config.omega, config.epsilon, alg in config.p_success_algorithms, config.record_timing)
             for alg in config.algorithms for r0 in config.r0_list for budget in config.budgets]
    records = [r for cell in _pool_map(_benchmark_cell, tasks, config.workers) for r in cell]
    order = {a: i for i, a in enumerate(config.algorithms)}
    records.sort(key=lambda r: (order[r.algorithm], r.r0, r.budget, r.replicate))
    _write_csv(config.out / BENCHMARK_FILE, BENCHMARK_COLUMNS, (r.row() for r in records))
    _write_csv(config.out / SUMMARY_FILE, SUMMARY_COLUMNS, summarize(records))
    return records


def summarize(records: Sequence[RunRecord]) -> list[tuple]:
    cells: dict[tuple, list[RunRecord]] = {}
    for r in records:
        cells.setdefault((r.algorithm, r.r0, r.budget), []).append(r)
    rows = []
    for (alg, r0, budget), recs in cells.items():
        successes = sum(r.correct for r in recs)
        rows.append((alg, r0, budget, len(recs), successes, successes / len(recs),
                     sum(r.recommended_arm < 0 for r in recs)))
    return rows


def read_run_records(path: str | Path) -> list[RunRecord]:
    path = Path(path)
    if path.is_dir():
        path = path / BENCHMARK_FILE
    if not path.exists():
        raise MissingRecords(f"benchmark records {path} not found; run `benchmark` first")
    out = []
    for r in _read_csv(path):
        out.append(RunRecord(r["algorithm"], float(r["r0"]), int(r["budget"]), int(r["replicate"]),
                             int(r["recommended_arm"]), r["correct"] == "1",
                             float(r["p_success"]) if r["p_success"] else None,
                             json.loads(r["pulls_json"]),
                             float(r["wall_ms"]) if r["wall_ms"] else None))
    return out


# calibration ---------------------------------------------------------------

def calibration_table(records: Sequence[RunRecord], algorithm: str = "ttts",
                      edges: Sequence[float] = CALIBRATION_EDGES) -> list[tuple]:
    """Per-R0 and pooled (``r0 = "all"``) bins of P_s against correctness."""
    usable = [r for r in records if r.algorithm == algorithm and r.p_success is not None]
    groups: list[tuple[Any, list[RunRecord]]] = [
        (r0, [r for r in usable if r.r0 == r0]) for r0 in sorted({r.r0 for r in usable})]
    groups.append(("all", usable))
    rows = []
    for label, recs in groups:
        for b in bin_success_calibration([(r.p_success, r.correct) for r in recs], edges):
            rows.append((label, b.lower, b.upper, b.trials, b.successes, b.rate, b.cp_lower, b.cp_upper))
    return rows


def cmd_calibration(config: ExperimentConfig, records: Sequence[RunRecord] | None = None) -> list[tuple]:
    if records is None:
        records = read_run_records(config.out / BENCHMARK_FILE)
    rows = calibration_table(records)
    _write_csv(config.out / CALIBRATION_FILE, CALIBRATION_COLUMNS, rows)
    return rows


# threshold -----------------------------------------------------------------

def cmd_threshold(r0: float, dispersion: float = 0.5, controlled_fraction: float = 0.0,
                  cutoff: float = 1e-10) -> tuple[float, int]:
    """Extinction probability and fade-out threshold; raises ``Subcritical``."""
    model = OffspringModel(r0, dispersion, controlled_fraction)
    t0 = fade_out_threshold(model, cutoff)
    return extinction_probability(model), t0
