"""Chain-binomial S-E-I-R day loop, jitted and pure-numpy variants.

Compartments are indexed ``c = 2 * group + vaccinated``. Both variants draw
from the generator in the same order (new exposures, E->I, I->R, symptomatic
flags, each over all compartments), so they agree for equal generator
states up to the last bit of ``exp``.
"""

from __future__ import annotations

import math

import numpy as np

from . import _accel


def _epidemic_loop_scalar(rng, S, E, I, R, group_size, contact, q, susceptibility,
                          p_ei, p_ir, symptomatic_fraction, horizon):
    n_comp = S.shape[0]
    n_groups = group_size.shape[0]
    cumulative = 0
    symptomatic = 0
    for c in range(n_comp):
        cumulative += E[c] + I[c] + R[c]
        symptomatic += rng.binomial(E[c] + I[c] + R[c], symptomatic_fraction)
    prevalence = np.zeros(n_groups)
    new_e = np.zeros(n_comp, np.int64)
    new_i = np.zeros(n_comp, np.int64)
    new_r = np.zeros(n_comp, np.int64)
    for _day in range(horizon):
        active = 0
        for c in range(n_comp):
            active += E[c] + I[c]
        if active == 0:
            break
        for g in range(n_groups):
            prevalence[g] = (I[2 * g] + I[2 * g + 1]) / group_size[g]
        for c in range(n_comp):
            g = c // 2
            force = 0.0
            for h in range(n_groups):
                force += contact[g, h] * prevalence[h]
            p = 1.0 - math.exp(-q * force * susceptibility[c])
            new_e[c] = rng.binomial(S[c], p)
        for c in range(n_comp):
            new_i[c] = rng.binomial(E[c], p_ei)
        for c in range(n_comp):
            new_r[c] = rng.binomial(I[c], p_ir)
        for c in range(n_comp):
            symptomatic += rng.binomial(new_e[c], symptomatic_fraction)
        for c in range(n_comp):
            S[c] -= new_e[c]
            E[c] += new_e[c] - new_i[c]
            I[c] += new_i[c] - new_r[c]
            R[c] += new_r[c]
            cumulative += new_e[c]
    return cumulative, symptomatic


def _epidemic_loop_numpy(rng, S, E, I, R, group_size, contact, q, susceptibility,
                         p_ei, p_ir, symptomatic_fraction, horizon):
    group_of = np.arange(S.shape[0]) // 2
    cumulative = int((E + I + R).sum())
    symptomatic = int(rng.binomial(E + I + R, symptomatic_fraction).sum())
    for _day in range(horizon):
        if not (E.any() or I.any()):
            break
        prevalence = (I[0::2] + I[1::2]) / group_size
        force = (contact @ prevalence)[group_of]
        p = 1.0 - np.exp(-q * force * susceptibility)
        new_e = rng.binomial(S, p)
        new_i = rng.binomial(E, p_ei)
        new_r = rng.binomial(I, p_ir)
        symptomatic += int(rng.binomial(new_e, symptomatic_fraction).sum())
        S -= new_e
        E += new_e - new_i
        I += new_i - new_r
        R += new_r
        cumulative += int(new_e.sum())
    return cumulative, symptomatic


epidemic_loop_numba = _accel.njit(_epidemic_loop_scalar)
epidemic_loop_numpy = _epidemic_loop_numpy


def epidemic_loop(use_numba: bool | None = None):
    """Kernel selected by ``use_numba``, defaulting to the environment flag."""
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    return epidemic_loop_numba if use_numba else epidemic_loop_numpy
