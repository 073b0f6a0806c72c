"""Probability that a recommendation is correct, and its empirical calibration.

For independent posteriors over arm means, the probability that the
recommended arm ``J`` has the largest mean is

    P_s = integral  f_J(x) * prod_{k != J} F_k(x)  dx

evaluated here with composite Gauss-Legendre quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .stats import TPosterior, t_cdf, t_pdf

__all__ = [
    "PosteriorSet",
    "probability_of_success",
    "quadrature_edges",
    "clopper_pearson",
    "CalibrationBin",
    "bin_success_calibration",
    "PS_EDGES",
]

NODES_PER_PANEL = 16
TAIL_MASS = 1e-12
# Panel edges around each posterior, in units of its spread.
_OFFSETS = np.array([-10.0, -6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0, 10.0])
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(NODES_PER_PANEL)

PS_EDGES = tuple(np.round(np.arange(0.5, 1.0001, 0.05), 10))


@dataclass(frozen=True)
class PosteriorSet:
    posteriors: tuple[TPosterior, ...]
    recommended: int

    def __post_init__(self):
        object.__setattr__(self, "posteriors", tuple(self.posteriors))
        if not 0 <= self.recommended < len(self.posteriors):
            raise ValueError(f"recommended arm {self.recommended} out of range")
        for p in self.posteriors:
            if p.df < 2:
                raise ValueError(f"posterior df must be >= 2, got {p.df}")


def _spread(p: TPosterior) -> float:
    return p.std if p.df > 2 else 3.0 * p.scale


def quadrature_edges(posteriors: Sequence[TPosterior], recommended: int) -> np.ndarray:
    """Panel edges: a fixed pattern around every posterior, clipped to the
    recommended arm's central ``1 - 2e-12`` mass, plus geometrically growing
    panels out to that cut so heavy t tails are resolved."""
    pj = posteriors[recommended]
    lo = float(pj.ppf(TAIL_MASS))
    hi = float(pj.ppf(1.0 - TAIL_MASS))
    edges = [lo, hi]
    for p in posteriors:
        edges.extend(p.location + _OFFSETS * _spread(p))
    reach = 10.0 * _spread(pj)
    far = max(pj.location - lo, hi - pj.location)
    while reach < far:
        reach *= 2.0
        edges.extend((pj.location - reach, pj.location + reach))
    edges = np.unique(np.clip(edges, lo, hi))
    keep = np.concatenate(([True], np.diff(edges) > 1e-12 * (hi - lo)))
    return edges[keep]


def probability_of_success(posterior_set: PosteriorSet) -> float:
    posts = posterior_set.posteriors
    J = posterior_set.recommended
    if len(posts) == 1:
        return 1.0
    edges = quadrature_edges(posts, J)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    x = (a + b) * 0.5 + half * _GL_NODES
    w = (half * _GL_WEIGHTS).ravel()
    x = x.ravel()

    pj = posts[J]
    integrand = t_pdf(pj.df, (x - pj.location) / pj.scale) / pj.scale
    others = [p for k, p in enumerate(posts) if k != J]
    df = np.array([p.df for p in others])[:, None]
    loc = np.array([p.location for p in others])[:, None]
    scale = np.array([p.scale for p in others])[:, None]
    integrand = integrand * np.prod(t_cdf(df, (x - loc) / scale), axis=0)
    return float(min(max(np.dot(w, integrand), 0.0), 1.0))


def clopper_pearson(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial interval from beta quantiles."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    alpha = 1.0 - confidence
    lower = 0.0 if successes == 0 else float(sps.beta.ppf(alpha / 2, successes, trials - successes + 1))
    upper = 1.0 if successes == trials else float(sps.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lower, upper


@dataclass(frozen=True)
class CalibrationBin:
    lower: float
    upper: float
    trials: int
    successes: int
    rate: float | None
    cp_lower: float | None
    cp_upper: float | None

    @property
    def cp_half_width(self) -> float | None:
        if self.cp_lower is None:
            return None
        return 0.5 * (self.cp_upper - self.cp_lower)


def bin_success_calibration(records: Iterable[tuple[float, bool]], edges: Sequence[float],
                            confidence: float = 0.95) -> list[CalibrationBin]:
    """Bernoulli summary per half-open bin ``[edge_i, edge_{i+1})``.

    The last bin also takes values equal to its upper edge so that ``P_s = 1``
    is counted. Records outside ``[edges[0], edges[-1]]`` are dropped.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing with at least two entries")
    n_bins = len(edges) - 1
    trials = np.zeros(n_bins, dtype=int)
    successes = np.zeros(n_bins, dtype=int)
    for ps, correct in records:
        if ps < edges[0] or ps > edges[-1]:
            continue
        i = min(int(np.searchsorted(edges, ps, side="right")) - 1, n_bins - 1)
        trials[i] += 1
        successes[i] += bool(correct)
    out = []
    for i in range(n_bins):
        n, s = int(trials[i]), int(successes[i])
        if n:
            lo, up = clopper_pearson(s, n, confidence)
            out.append(CalibrationBin(float(edges[i]), float(edges[i + 1]), n, s, s / n, lo, up))
        else:
            out.append(CalibrationBin(float(edges[i]), float(edges[i + 1]), 0, 0, None, None, None))
    return out
