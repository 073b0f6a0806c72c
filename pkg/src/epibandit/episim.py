"""Desk-scale stochastic influenza surrogate used as the bandit environment.

Five age groups (pre-school, school-age, young adult, older adult, elderly)
mix through a contact matrix; transmission follows a daily chain-binomial
S-E-I-R process with a leaky vaccine that scales susceptibility by
``1 - efficacy``. Each arm is one of the 32 boolean allocations of a limited
dose stock over the age groups.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from ._kernels import epidemic_loop
from .bandits import RawOutcome
from .errors import ConfigError, NoConvergence
from .fadeout import OffspringModel, fade_out_threshold

__all__ = [
    "AGE_GROUPS",
    "VaccineStrategy",
    "Scenario",
    "SimulationResult",
    "enumerate_strategies",
    "allocate_doses",
    "dominant_eigenvalue",
    "next_generation_matrix",
    "calibrate_transmissibility",
    "simulate",
    "SurrogateEnvironment",
    "SyntheticEnvironment",
    "make_environment",
    "make_synthetic_environment",
    "load_scenario",
    "default_scenario",
]

AGE_GROUPS = ("pre-school", "school-age", "young adult", "older adult", "elderly")
N_GROUPS = len(AGE_GROUPS)


@dataclass(frozen=True)
class VaccineStrategy:
    """Which age groups receive vaccine; index reads the tuple as big-endian bits."""

    allocate: tuple[bool, ...]

    def __post_init__(self):
        allocate = tuple(bool(a) for a in self.allocate)
        if len(allocate) != N_GROUPS:
            raise ValueError(f"allocation needs {N_GROUPS} entries, got {len(allocate)}")
        object.__setattr__(self, "allocate", allocate)

    @property
    def index(self) -> int:
        return sum(1 << (N_GROUPS - 1 - i) for i, a in enumerate(self.allocate) if a)

    @classmethod
    def from_index(cls, index: int) -> "VaccineStrategy":
        if not 0 <= index < 2 ** N_GROUPS:
            raise ValueError(f"strategy index must lie in [0, {2 ** N_GROUPS}), got {index}")
        return cls(tuple(bool(index >> (N_GROUPS - 1 - i) & 1) for i in range(N_GROUPS)))

    def __str__(self):
        return "<" + ",".join(str(int(a)) for a in self.allocate) + ">"


def enumerate_strategies() -> list[VaccineStrategy]:
    return [VaccineStrategy.from_index(i) for i in range(2 ** N_GROUPS)]


def allocate_doses(strategy: VaccineStrategy, doses: int, group_sizes: Sequence[int]) -> np.ndarray:
    """Split ``doses`` over selected groups proportionally to their size.

    Largest-remainder rounding; ties in the remainder go to the lower index.
    """
    if doses < 0:
        raise ValueError(f"doses must be nonnegative, got {doses}")
    sizes = np.asarray(group_sizes, dtype=np.int64)
    selected = np.asarray(strategy.allocate, dtype=bool)
    out = np.zeros(len(sizes), dtype=np.int64)
    eligible = int(sizes[selected].sum())
    if eligible == 0 or doses == 0:
        return out
    if doses >= eligible:
        out[selected] = sizes[selected]
        return out
    quota = doses * sizes[selected] / eligible
    base = np.floor(quota).astype(np.int64)
    leftover = doses - int(base.sum())
    order = np.argsort(-(quota - base), kind="stable")
    base[order[:leftover]] += 1
    out[selected] = base
    return out


@dataclass(frozen=True)
class Scenario:
    group_sizes: tuple[int, ...] = (670, 2000, 1500, 4500, 1330)
    r0: float = 1.4
    contact_matrix: tuple[tuple[float, ...], ...] = ()
    seeds: int = 10
    horizon_days: int = 180
    vaccine_doses: int | None = None
    vaccine_efficacy: float = 0.5
    symptomatic_fraction: float = 0.67
    infectious_period_days: float = 3.0
    latent_period_days: float = 1.5
    establishment_threshold: int | None = None
    dispersion: float = 0.5
    cutoff: float = 1e-10
    controlled_fraction: float = 0.0
    transmissibility: float | None = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.group_sizes)
        object.__setattr__(self, "group_sizes", sizes)
        if len(sizes) != N_GROUPS or min(sizes) <= 0:
            raise ConfigError(f"group_sizes needs {N_GROUPS} positive integers, got {sizes}")
        contact = self.contact_matrix or _default_contact_matrix()
        contact = tuple(tuple(float(x) for x in row) for row in contact)
        if len(contact) != N_GROUPS or any(len(row) != N_GROUPS for row in contact):
            raise ConfigError(f"contact_matrix must be {N_GROUPS}x{N_GROUPS}")
        if any(x < 0 or not math.isfinite(x) for row in contact for x in row):
            raise ConfigError("contact rates must be finite and nonnegative")
        object.__setattr__(self, "contact_matrix", contact)
        total = sum(sizes)
        if self.vaccine_doses is None:
            object.__setattr__(self, "vaccine_doses", math.ceil(0.045 * total))
        if not 0 <= self.vaccine_doses <= total:
            raise ConfigError(f"vaccine_doses must lie in [0, {total}], got {self.vaccine_doses}")
        if not self.r0 > 0:
            raise ConfigError(f"r0 must be positive, got {self.r0}")
        if not 0 < self.seeds <= total:
            raise ConfigError(f"seeds must lie in [1, {total}], got {self.seeds}")
        if self.horizon_days < 1:
            raise ConfigError("horizon_days must be positive")
        if not 0.0 <= self.vaccine_efficacy <= 1.0:
            raise ConfigError("vaccine_efficacy must lie in [0, 1]")
        if not 0.0 < self.symptomatic_fraction <= 1.0:
            raise ConfigError("symptomatic_fraction must lie in (0, 1]")
        if not self.infectious_period_days >= 1.0:
            raise ConfigError("infectious_period_days must be at least one day (daily steps)")
        if self.latent_period_days < 0:
            raise ConfigError("latent_period_days must be nonnegative")
        if self.establishment_threshold is not None and self.establishment_threshold < 1:
            raise ConfigError("establishment_threshold must be a positive integer")
        if self.transmissibility is not None and self.transmissibility < 0:
            raise ConfigError("transmissibility must be nonnegative")

    @property
    def total_population(self) -> int:
        return sum(self.group_sizes)

    @property
    def contact(self) -> np.ndarray:
        return np.array(self.contact_matrix, dtype=float)

    def threshold(self) -> int:
        if self.establishment_threshold is not None:
            return self.establishment_threshold
        model = OffspringModel(self.r0, self.dispersion, self.controlled_fraction)
        return fade_out_threshold(model, self.cutoff)

    def calibrated(self) -> "Scenario":
        """Copy with transmissibility and establishment threshold resolved."""
        q = self.transmissibility
        if q is None:
            q = calibrate_transmissibility(self)
        return dataclasses.replace(self, transmissibility=q,
                                   establishment_threshold=self.threshold())

    def with_r0(self, r0: float) -> "Scenario":
        """Copy at a new R0; derived quantities are recomputed on calibration."""
        return dataclasses.replace(self, r0=r0, transmissibility=None,
                                   establishment_threshold=None)


@dataclass(frozen=True)
class SimulationResult:
    outcome: float
    cumulative_infections: int
    established: bool
    symptomatic: int = 0


def _default_contact_matrix() -> tuple[tuple[float, ...], ...]:
    return _load_packaged_default()["contact_matrix"]


def _load_packaged_default() -> dict[str, Any]:
    text = resources.files("epibandit").joinpath("data/default_scenario.yaml").read_text()
    return yaml.safe_load(text)


def next_generation_matrix(scenario: Scenario) -> np.ndarray:
    """Expected secondary cases in group ``g`` per case in group ``h``, per unit
    transmissibility, in a fully susceptible population."""
    sizes = np.asarray(scenario.group_sizes, dtype=float)
    return scenario.contact * (sizes[:, None] / sizes[None, :]) * scenario.infectious_period_days


def dominant_eigenvalue(matrix: np.ndarray, tol: float = 1e-14, max_iter: int = 100_000) -> float:
    """Perron root of a nonnegative irreducible matrix by power iteration."""
    m = np.asarray(matrix, dtype=float)
    v = np.ones(m.shape[0]) / m.shape[0]
    # a shift by the identity makes the iteration primitive without moving the Perron vector
    shift = max(float(np.max(np.diag(m))), 1.0)
    shifted = m + shift * np.eye(m.shape[0])
    for _ in range(max_iter):
        w = shifted @ v
        w /= w.sum()
        if np.max(np.abs(w - v)) <= tol:
            return float((m @ w).sum())
        v = w
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps")


def calibrate_transmissibility(scenario: Scenario) -> float:
    """Per-contact transmission scalar ``q`` with dominant NGM eigenvalue equal to R0."""
    ngm = next_generation_matrix(scenario)
    rho = dominant_eigenvalue(ngm)
    if not rho > 0:
        raise NoConvergence("next-generation matrix has no positive dominant eigenvalue")
    return scenario.r0 / rho


def simulate(scenario: Scenario, strategy: VaccineStrategy, rng: np.random.Generator,
             use_numba: bool | None = None) -> SimulationResult:
    q = scenario.transmissibility
    if q is None:
        q = calibrate_transmissibility(scenario)
    threshold = scenario.threshold()
    sizes = np.asarray(scenario.group_sizes, dtype=np.int64)
    vaccinated = allocate_doses(strategy, scenario.vaccine_doses, sizes)

    pool = np.empty(2 * N_GROUPS, dtype=np.int64)
    pool[0::2] = sizes - vaccinated
    pool[1::2] = vaccinated
    seeded = rng.multivariate_hypergeometric(pool, scenario.seeds)
    S = pool - seeded
    E = np.zeros_like(S)
    I = seeded.astype(np.int64)
    R = np.zeros_like(S)
    susceptibility = np.tile([1.0, 1.0 - scenario.vaccine_efficacy], N_GROUPS)
    p_ei = 1.0 if scenario.latent_period_days <= 1.0 else 1.0 / scenario.latent_period_days
    p_ir = 1.0 / scenario.infectious_period_days

    loop = epidemic_loop(use_numba)
    cumulative, symptomatic = loop(
        rng, S, E, I, R, sizes.astype(float), scenario.contact, float(q), susceptibility,
        p_ei, p_ir, scenario.symptomatic_fraction, scenario.horizon_days)
    cumulative, symptomatic = int(cumulative), int(symptomatic)
    return SimulationResult(outcome=symptomatic / scenario.total_population,
                            cumulative_infections=cumulative,
                            established=cumulative >= threshold,
                            symptomatic=symptomatic)


@dataclass
class SurrogateEnvironment:
    scenario: Scenario
    strategies: list[VaccineStrategy]
    use_numba: bool | None = None

    def __post_init__(self):
        if not self.strategies:
            raise ValueError("need at least one strategy")
        self.scenario = self.scenario.calibrated()

    @property
    def arm_count(self) -> int:
        return len(self.strategies)

    def simulate(self, arm: int, rng: np.random.Generator) -> SimulationResult:
        return simulate(self.scenario, self.strategies[arm], rng, self.use_numba)

    def pull(self, arm: int, rng: np.random.Generator) -> RawOutcome:
        result = self.simulate(arm, rng)
        return RawOutcome(result.outcome, result.established)


def make_environment(scenario: Scenario, strategies: Sequence[VaccineStrategy] | None = None,
                     use_numba: bool | None = None) -> SurrogateEnvironment:
    strategies = enumerate_strategies() if strategies is None else list(strategies)
    return SurrogateEnvironment(scenario, strategies, use_numba)


@dataclass
class SyntheticEnvironment:
    """Oracle arms: Gaussian outcomes truncated to [0, 1], established with a
    fixed probability per arm; faded runs report outcome 0."""

    means: np.ndarray
    sigmas: np.ndarray
    establish_prob: np.ndarray = field(default=None)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if self.establish_prob is None:
            self.establish_prob = np.ones_like(self.means)
        self.establish_prob = np.asarray(self.establish_prob, dtype=float)
        if not (len(self.means) == len(self.sigmas) == len(self.establish_prob)) or not len(self.means):
            raise ValueError("means, sigmas and establish_prob need equal nonzero length")
        if np.any(self.sigmas <= 0):
            raise ValueError("sigmas must be positive")
        if np.any((self.establish_prob < 0) | (self.establish_prob > 1)):
            raise ValueError("establish_prob must lie in [0, 1]")

    @property
    def arm_count(self) -> int:
        return len(self.means)

    @property
    def best_arm(self) -> int:
        return int(np.argmin(self.means))

    def pull(self, arm: int, rng: np.random.Generator) -> RawOutcome:
        if rng.random() >= self.establish_prob[arm]:
            return RawOutcome(0.0, False)
        m, s = self.means[arm], self.sigmas[arm]
        for _ in range(1000):
            x = rng.normal(m, s)
            if 0.0 <= x <= 1.0:
                return RawOutcome(float(x), True)
        return RawOutcome(float(min(max(x, 0.0), 1.0)), True)


def make_synthetic_environment(means, sigmas, establish_prob=None) -> SyntheticEnvironment:
    return SyntheticEnvironment(means, sigmas, establish_prob)


SCENARIO_KEYS = frozenset(f.name for f in dataclasses.fields(Scenario))


def scenario_from_mapping(data: Mapping[str, Any]) -> Scenario:
    unknown = set(data) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario key(s): {', '.join(sorted(unknown))}")
    kwargs = dict(data)
    for key in ("group_sizes",):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    if "contact_matrix" in kwargs:
        kwargs["contact_matrix"] = tuple(tuple(row) for row in kwargs["contact_matrix"])
    try:
        return Scenario(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"scenario {path} must be a key-value mapping")
    return scenario_from_mapping(data)


def default_scenario(**overrides) -> Scenario:
    data = _load_packaged_default()
    data.update(overrides)
    return scenario_from_mapping(data)
