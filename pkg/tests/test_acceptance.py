"""Acceptance gate. Run alone with ``pytest -m acceptance -s``.

Each test prints one ``criterion N PASS|FAIL`` line; the lines are repeated
in the terminal summary.
"""

import math
import shutil
import time
from dataclasses import dataclass

import numpy as np
import pytest

from epibandit import harness
from epibandit.bandits import RawOutcome, run_algorithm
from epibandit.cli import main as cli_main
from epibandit.confidence import PosteriorSet, probability_of_success
from epibandit.episim import default_scenario, enumerate_strategies, simulate
from epibandit.fadeout import OffspringModel, extinction_probability, fade_out_threshold, pgf
from epibandit.stats import TPosterior, sample_posteriors, t_tail_bound

pytestmark = pytest.mark.acceptance

GROUND_TRUTH_SEEDS = (0, 1)
GROUND_TRUTH_RUNS = 1000
# regression baseline: best strategy of the default surrogate at r0 = 1.4
BASELINE_BEST_STRATEGY = 8


@pytest.fixture(scope="module")
def ground_truths():
    """1000-run surrogate ground truth at r0 = 1.4 for two master seeds."""
    out = {}
    for seed in GROUND_TRUTH_SEEDS:
        config, scenario = harness.load_config(None, r0_list=[1.4], ground_truth_runs=GROUND_TRUTH_RUNS,
                                               master_seed=seed)
        start = time.perf_counter()
        truth, _ = harness.compute_ground_truth(config, scenario)
        out[seed] = (truth, time.perf_counter() - start)
    return out


# 1 ------------------------------------------------------------------------

def _monte_carlo_ps(posts, J, draws, rng, chunk=50_000):
    df = np.array([p.df for p in posts])
    loc = np.array([p.location for p in posts])
    scale = np.array([p.scale for p in posts])
    hits = 0
    for _ in range(draws // chunk):
        hits += int(np.sum(np.argmax(sample_posteriors(df, loc, scale, rng, size=chunk), axis=1) == J))
    return hits / draws


def test_quadrature_against_monte_carlo(criterion):
    with criterion(1, "P_s quadrature vs 1e6-draw Monte Carlo; symmetric 1/K") as notes:
        start = time.perf_counter()
        rng = np.random.default_rng(20240101)
        worst = 0.0
        for i in range(20):
            K = (2, 5, 32)[i % 3]
            posts = [TPosterior(float(rng.integers(3, 51)), rng.normal(0.0, 0.05), rng.uniform(0.005, 0.05))
                     for _ in range(K)]
            J = int(rng.integers(K))
            ps = probability_of_success(PosteriorSet(posts, J))
            mc = _monte_carlo_ps(posts, J, 1_000_000, rng)
            worst = max(worst, abs(ps - mc))
        sym = 0.0
        for K in (2, 5, 32):
            for df in (3, 10, 50):
                posts = [TPosterior(df, 0.2, 0.03)] * K
                sym = max(sym, abs(probability_of_success(PosteriorSet(posts, K - 1)) - 1 / K))
        elapsed = time.perf_counter() - start
        notes += [f"max |quad - MC| = {worst:.2e}", f"max symmetric error = {sym:.1e}"]
        assert worst <= 1.5e-3
        assert sym <= 1e-6
        assert elapsed < 60


# 2 ------------------------------------------------------------------------

def _oracle_pgf(r0, k, c, s):
    return c + (1 - c) * (1 + r0 / k * (1 - s)) ** (-k)


def _oracle_root(r0, k, c):
    lo, hi = 0.0, 1 - 1e-9
    while hi - lo > 0:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _oracle_pgf(r0, k, c, mid) - mid > 0:
            lo = mid
        else:
            hi = mid
    return lo


def test_extinction_grid(criterion):
    with criterion(2, "extinction residual, bisection oracle and T0 semantics on the grid") as notes:
        start = time.perf_counter()
        checked = skipped = 0
        worst_res = worst_diff = 0.0
        for r0 in np.round(np.arange(1.1, 2.41, 0.1), 10):
            for k in (0.1, 0.5, 1.0, 5.0):
                for c in (0.0, 0.045, 0.3):
                    model = OffspringModel(float(r0), k, c)
                    p = extinction_probability(model)
                    if not model.supercritical:
                        assert p == 1.0
                        skipped += 1
                        continue
                    worst_res = max(worst_res, abs(pgf(model, p) - p))
                    worst_diff = max(worst_diff, abs(p - _oracle_root(float(r0), k, c)))
                    t0 = fade_out_threshold(model, 1e-10)
                    assert p ** t0 <= 1e-10 < p ** (t0 - 1)
                    checked += 1
        elapsed = time.perf_counter() - start
        notes += [f"{checked} supercritical cells, {skipped} subcritical", f"max residual {worst_res:.1e}",
                  f"max oracle gap {worst_diff:.1e}"]
        assert worst_res <= 1e-10
        assert worst_diff <= 1e-9
        assert elapsed < 10


# 3 ------------------------------------------------------------------------

def test_tail_bound_dominance(criterion):
    with criterion(3, "t tail bound dominates 1e6-draw tail frequency") as notes:
        start = time.perf_counter()
        rng = np.random.default_rng(7)
        tightest = 1.0
        for df in (3, 5, 10, 30):
            x = np.abs(rng.standard_t(df, 1_000_000)) / math.sqrt(df / (df - 2))
            for beta in (1.0, 2.0, 3.0):
                freq = float(np.mean(x >= beta))
                bound = t_tail_bound(df, beta)
                assert freq <= bound, (df, beta, freq, bound)
                tightest = min(tightest, bound - freq)
        elapsed = time.perf_counter() - start
        notes.append(f"smallest slack {tightest:.3g}")
        assert elapsed < 60


# 4 ------------------------------------------------------------------------

@dataclass
class DominanceEnvironment:
    """Arm 0 outcomes in [0.1, 0.2], arm 1 in [0.5, 0.6]: arm 0's rewards always higher."""

    @property
    def arm_count(self):
        return 2

    def pull(self, arm, rng):
        low = 0.1 if arm == 0 else 0.5
        return RawOutcome(low + 0.1 * rng.random(), True)


def test_dominance(criterion):
    with criterion(4, "all algorithms pick the dominant arm 100/100 at T = 4K; exact budgets") as notes:
        start = time.perf_counter()
        env = DominanceEnvironment()
        budget = 4 * env.arm_count
        failures = {}
        for name in ("uniform", "successive_rejects", "bayesgap", "ttts"):
            wrong = 0
            for i in range(100):
                rng = harness.stream_for(0, "dominance", name, i)
                rec = run_algorithm(name, env, budget, rng)
                assert len(rec.run.pull_log) == rec.run.pulls_used == budget
                wrong += rec.arm != 0
            failures[name] = wrong
        elapsed = time.perf_counter() - start
        notes.append(", ".join(f"{k} {100 - v}/100" for k, v in failures.items()))
        assert all(v == 0 for v in failures.values()), failures
        assert elapsed < 60


# 5 ------------------------------------------------------------------------

def _success_rate(env, name, budget, best):
    wins = 0
    for i in range(100):
        rng = harness.stream_for(0, "benchmark", name, 1.4, budget, i)
        arm, correct, _, _ = harness.run_replicate(env, name, budget, rng, best)
        wins += correct
    return wins / 100


def test_efficiency(criterion, ground_truths):
    with criterion(5, "uniform at 2B* stays below 0.9 on the synthetic r0 = 1.4 environment") as notes:
        truth, gt_time = ground_truths[GROUND_TRUTH_SEEDS[0]]
        start = time.perf_counter()
        env = truth.synthetic_environment(1.4)
        best = truth.best_arm(1.4)
        b_star = None
        for budget in harness.DEFAULT_BUDGETS:
            rate = _success_rate(env, "ttts", budget, best)
            if rate >= 0.9:
                b_star = budget
                break
        assert b_star is not None, "TTTS never reached 0.9 on the budget grid"
        uniform_rate = _success_rate(env, "uniform", 2 * b_star, best)
        elapsed = time.perf_counter() - start + gt_time
        notes += [f"B* = {b_star} (TTTS {rate:.2f})", f"uniform at {2 * b_star}: {uniform_rate:.2f}"]
        assert uniform_rate < 0.9
        assert elapsed < 600


# 6 ------------------------------------------------------------------------

def _major_modes(counts, share=0.10):
    peak = counts.max()
    return [i for i in range(len(counts))
            if counts[i] >= share * peak
            and (i == 0 or counts[i] >= counts[i - 1])
            and (i == len(counts) - 1 or counts[i] > counts[i + 1])]


def unimodal_screen(values, bins=20):
    """True when no bin between two major histogram modes drops below a
    quarter of the lower of the two flanking modes."""
    counts, _ = np.histogram(values, bins=bins)
    modes = _major_modes(counts)
    for a, b in zip(modes, modes[1:]):
        floor = 0.25 * min(counts[a], counts[b])
        if counts[a + 1:b].size and counts[a + 1:b].min() < floor:
            return False
    return True


def test_bimodality(criterion):
    with criterion(6, "fade-outs at r0 = 1.4, unimodal established cluster, r0 = 2.4 established") as notes:
        start = time.perf_counter()
        strategy = enumerate_strategies()[0]
        results = {}
        for r0 in (1.4, 2.4):
            scenario = default_scenario(r0=r0).calibrated()
            rng = harness.stream_for(0, "bimodality", r0)
            results[r0] = [simulate(scenario, strategy, rng) for _ in range(1000)]
        low = results[1.4]
        faded = sum(not r.established for r in low) / 1000
        established = np.array([r.outcome for r in low if r.established])
        high_est = sum(r.established for r in results[2.4]) / 1000
        elapsed = time.perf_counter() - start
        notes += [f"r0 1.4 non-established {faded:.1%}", f"r0 2.4 established {high_est:.1%}"]
        assert faded >= 0.02
        assert unimodal_screen(established)
        assert high_est >= 0.99
        assert elapsed < 120


def test_unimodal_screen_rejects_two_clusters():
    rng = np.random.default_rng(0)
    two = np.concatenate([rng.normal(0.1, 0.01, 500), rng.normal(0.3, 0.01, 500)])
    assert not unimodal_screen(two)
    assert unimodal_screen(rng.normal(0.2, 0.02, 1000))


# 7 ------------------------------------------------------------------------

def test_ground_truth_stability(criterion, ground_truths):
    with criterion(7, "1000-run ground-truth argmin agrees across two master seeds") as notes:
        best = {seed: truth.best_arm(1.4) for seed, (truth, _) in ground_truths.items()}
        elapsed = sum(t for _, t in ground_truths.values())
        notes += [f"best per seed {best}", f"baseline {BASELINE_BEST_STRATEGY}"]
        assert len(set(best.values())) == 1
        assert set(best.values()) == {BASELINE_BEST_STRATEGY}
        assert elapsed < 600


# 8 ------------------------------------------------------------------------

def test_probability_of_success_conservative(criterion, ground_truths, tmp_path):
    with criterion(8, "TTTS P_s bins on the surrogate are conservative") as notes:
        truth, _ = ground_truths[GROUND_TRUTH_SEEDS[0]]
        config, scenario = harness.load_config(None, r0_list=[1.4], algorithms=["ttts"],
                                               output_dir=str(tmp_path), master_seed=0)
        start = time.perf_counter()
        records = harness.cmd_benchmark(config, scenario, truth)
        elapsed = time.perf_counter() - start
        rows = [r for r in harness.calibration_table(records) if r[0] == "all"]
        checked = 0
        for _, lower, _, trials, _, rate, cp_lo, cp_hi in rows:
            if trials >= 30:
                checked += 1
                assert rate >= lower - 0.5 * (cp_hi - cp_lo), (lower, trials, rate)
        notes += [f"{checked} bins with >= 30 trials", f"{len(records)} runs in {elapsed:.0f}s"]
        assert checked > 0
        assert elapsed < 600


# 9 ------------------------------------------------------------------------

def test_cli_determinism(criterion, tmp_path):
    with criterion(9, "benchmark CSVs byte-identical with 1 and 8 workers") as notes:
        start = time.perf_counter()
        cfg = tmp_path / "config.yaml"
        cfg.write_text("r0_list: [1.4]\nbudgets: [64, 128]\nreplicates: 8\nground_truth_runs: 20\n")
        one, eight = tmp_path / "w1", tmp_path / "w8"
        assert cli_main(["ground-truth", "--config", str(cfg), "--out", str(one), "--seed", "3"]) == 0
        eight.mkdir()
        shutil.copy(one / harness.GROUND_TRUTH_FILE, eight / harness.GROUND_TRUTH_FILE)
        for out, workers in ((one, "1"), (eight, "8")):
            assert cli_main(["benchmark", "--config", str(cfg), "--out", str(out), "--seed", "3",
                             "--workers", workers]) == 0
            assert cli_main(["calibration", "--config", str(cfg), "--out", str(out)]) == 0
        elapsed = time.perf_counter() - start
        for name in (harness.BENCHMARK_FILE, harness.SUMMARY_FILE, harness.CALIBRATION_FILE):
            assert (one / name).read_bytes() == (eight / name).read_bytes(), name
        notes.append(f"{len((one / harness.BENCHMARK_FILE).read_text().splitlines()) - 1} run rows")
        assert elapsed < 120
