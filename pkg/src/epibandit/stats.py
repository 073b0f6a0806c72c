"""Per-arm sufficient statistics and Student-t posteriors over arm means.

Rewards of an arm are modeled as Gaussian with unknown mean and variance.
Under the uninformative prior ``sigma**-3`` the posterior over the mean after
``n`` rewards is a location-scale t distribution with ``n`` degrees of
freedom, located at the sample mean with scale ``sqrt(S) / n`` where ``S`` is
the sum of squared deviations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegeneratePosterior

__all__ = [
    "ArmStatistics",
    "TPosterior",
    "update_statistics",
    "posterior_from_stats",
    "sample_posterior",
    "sample_posteriors",
    "t_cdf",
    "t_pdf",
    "t_ppf",
    "t_normalizer",
    "t_tail_bound",
]


@dataclass(frozen=True)
class ArmStatistics:
    """Running count, mean and sum of squared deviations of accepted rewards."""

    count: int = 0
    mean: float = 0.0
    sum_sq: float = 0.0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be nonnegative, got {self.count}")
        if self.sum_sq < 0:
            raise ValueError(f"sum_sq must be nonnegative, got {self.sum_sq}")
        if self.count == 0 and (self.mean != 0.0 or self.sum_sq != 0.0):
            raise ValueError("empty statistics must have zero mean and sum_sq")

    @property
    def variance(self) -> float:
        """Population variance ``S / n`` of the accepted rewards."""
        return self.sum_sq / self.count if self.count else 0.0

    @classmethod
    def from_rewards(cls, rewards) -> "ArmStatistics":
        stats = cls()
        for r in rewards:
            stats = update_statistics(stats, r)
        return stats


def update_statistics(stats: ArmStatistics, reward: float) -> ArmStatistics:
    # Welford recurrence; avoids the cancellation of sum(r**2) - n*mean**2.
    n = stats.count + 1
    delta = reward - stats.mean
    mean = stats.mean + delta / n
    sum_sq = stats.sum_sq + delta * (reward - mean)
    return ArmStatistics(n, mean, max(sum_sq, 0.0))


@dataclass(frozen=True)
class TPosterior:
    """Location-scale Student-t distribution ``location + scale * T_df``."""

    df: float
    location: float
    scale: float

    def __post_init__(self):
        if not self.df > 0:
            raise ValueError(f"df must be positive, got {self.df}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    @property
    def mean(self) -> float:
        return self.location

    @property
    def std(self) -> float:
        if self.df <= 2:
            raise DegeneratePosterior(f"t posterior with df={self.df} has no finite std")
        return self.scale * math.sqrt(self.df / (self.df - 2.0))

    def pdf(self, x):
        return t_pdf(self.df, (np.asarray(x, dtype=float) - self.location) / self.scale) / self.scale

    def cdf(self, x):
        return t_cdf(self.df, (np.asarray(x, dtype=float) - self.location) / self.scale)

    def ppf(self, q):
        return self.location + self.scale * t_ppf(self.df, q)


def posterior_from_stats(stats: ArmStatistics) -> TPosterior:
    if stats.count < 2:
        raise DegeneratePosterior(f"need at least 2 rewards, have {stats.count}")
    if stats.sum_sq <= 0.0:
        raise DegeneratePosterior("all rewards identical (zero sum of squares)")
    return TPosterior(df=float(stats.count), location=stats.mean,
                      scale=math.sqrt(stats.sum_sq) / stats.count)


def sample_posterior(post: TPosterior, rng: np.random.Generator) -> float:
    """One draw via the ratio construction ``z / sqrt(chi2_df / df)``."""
    if post.df < 2:
        raise DegeneratePosterior(f"sampling requires df >= 2, got {post.df}")
    z = rng.standard_normal()
    chi2 = rng.chisquare(post.df)
    return post.location + post.scale * z / math.sqrt(chi2 / post.df)


def sample_posteriors(df, location, scale, rng: np.random.Generator, size: int | None = None):
    """Vectorized draws, one per arm; with ``size`` returns a ``(size, K)`` array.

    Normals are drawn before chi-squares, matching :func:`sample_posterior`.
    """
    df = np.asarray(df, dtype=float)
    shape = df.shape if size is None else (size,) + df.shape
    z = rng.standard_normal(shape)
    chi2 = rng.chisquare(np.broadcast_to(df, shape))
    return location + scale * z / np.sqrt(chi2 / df)


def t_cdf(df, x):
    return special.stdtr(df, x)


def t_ppf(df, q):
    return special.stdtrit(df, q)


def t_normalizer(df):
    """``Gamma((df+1)/2) / (Gamma(df/2) * sqrt(pi*df))``, the density at zero."""
    df = np.asarray(df, dtype=float)
    return np.exp(special.gammaln(0.5 * (df + 1.0)) - special.gammaln(0.5 * df)) / np.sqrt(np.pi * df)


def t_pdf(df, x):
    df = np.asarray(df, dtype=float)
    x = np.asarray(x, dtype=float)
    out = t_normalizer(df) * np.exp(-0.5 * (df + 1.0) * np.log1p(x * x / df))
    return out if out.ndim else float(out)


def t_tail_bound(df: int, beta: float) -> float:
    """Upper bound on ``P(|X - mu| >= beta * sigma)`` for ``X ~ t_df(mu, lam)``.

    ``sigma`` is the standard deviation ``lam * sqrt(df / (df - 2))``. Values
    above one (small ``beta``) are clipped, which keeps the bound valid.
    """
    if df < 3:
        raise ValueError(f"df must be at least 3, got {df}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    nu = float(df)
    c = float(t_normalizer(nu))
    bound = (2.0 * math.sqrt(nu * (nu - 2.0)) / (nu - 1.0) * c / beta
             * (1.0 + beta * beta / (nu - 2.0)) ** (-0.5 * (nu - 1.0)))
    return min(bound, 1.0)
