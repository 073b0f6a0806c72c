"""Extinction probability of a negative-binomial branching process and the
derived fade-out threshold used to censor outbreaks that never took off.

The offspring distribution is NB(R0, dispersion) thinned by a random fraction
of controlled individuals, with generating function

    g(s) = c + (1 - c) * (1 + R0 / k * (1 - s)) ** -k

whose smallest fixed point on [0, 1] is the extinction probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NoConvergence, Subcritical

__all__ = [
    "OffspringModel",
    "pgf",
    "pgf_derivative",
    "extinction_probability",
    "threshold_from_extinction",
    "fade_out_threshold",
]

MAX_ITERATIONS = 10_000
BISECTION_UPPER = 1.0 - 1e-9


@dataclass(frozen=True)
class OffspringModel:
    r0: float
    dispersion: float = 0.5
    controlled_fraction: float = 0.0

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if not self.dispersion > 0:
            raise ValueError(f"dispersion must be positive, got {self.dispersion}")
        if not 0.0 <= self.controlled_fraction <= 1.0:
            raise ValueError(f"controlled_fraction must lie in [0, 1], got {self.controlled_fraction}")

    @property
    def effective_r(self) -> float:
        return (1.0 - self.controlled_fraction) * self.r0

    @property
    def supercritical(self) -> bool:
        return self.effective_r > 1.0


def pgf(model: OffspringModel, s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    c, k = model.controlled_fraction, model.dispersion
    # log1p keeps large-k (Poisson-like) models accurate
    uncontrolled = math.exp(-k * math.log1p(model.r0 / k * (1.0 - s)))
    return c + (1.0 - c) * uncontrolled


def pgf_derivative(model: OffspringModel, s: float) -> float:
    c, k = model.controlled_fraction, model.dispersion
    return (1.0 - c) * model.r0 * math.exp(-(k + 1.0) * math.log1p(model.r0 / k * (1.0 - s)))


def extinction_probability(model: OffspringModel, tol: float = 1e-12) -> float:
    """Smallest root of ``g(s) = s`` on [0, 1], with ``|g(p) - p| <= tol``.

    Fixed-point iteration from zero climbs monotonically to the minimal root.
    Besides the residual, iteration also waits until the implied distance to
    the root, ``residual / (1 - g'(s))``, is below ``tol``; near criticality
    that takes long, so after ``MAX_ITERATIONS`` it switches to bisection.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not model.supercritical:
        return 1.0

    s = 0.0
    for _ in range(MAX_ITERATIONS):
        g = pgf(model, s)
        residual = g - s
        if residual <= tol:
            slack = 1.0 - pgf_derivative(model, s)
            if slack > 0 and residual <= tol * slack:
                return s
        s = g

    lo, hi = s, BISECTION_UPPER
    if pgf(model, hi) - hi >= 0:
        raise NoConvergence(f"no sign change of g(s) - s below {hi} for {model}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if pgf(model, mid) - mid > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol and abs(pgf(model, lo) - lo) <= tol:
            return lo
    raise NoConvergence(f"bisection did not reach tolerance {tol} for {model}")


def threshold_from_extinction(p_ext: float, cutoff: float) -> int:
    """Least ``n`` with ``p_ext ** n <= cutoff`` (independent lineages)."""
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    if not 0.0 < p_ext < 1.0:
        raise Subcritical(f"no finite threshold for extinction probability {p_ext}")
    n = max(1, math.ceil(math.log(cutoff) / math.log(p_ext)))
    # guard the ceil against rounding in the logarithms
    while p_ext ** n > cutoff:
        n += 1
    while n > 1 and p_ext ** (n - 1) <= cutoff:
        n -= 1
    return n


def fade_out_threshold(model: OffspringModel, cutoff: float = 1e-10, tol: float = 1e-12) -> int:
    if not model.supercritical:
        raise Subcritical(
            f"effective reproduction (1 - {model.controlled_fraction}) * {model.r0} "
            f"= {model.effective_r:.6g} <= 1; outbreaks always fade out")
    return threshold_from_extinction(extinction_probability(model, tol), cutoff)
