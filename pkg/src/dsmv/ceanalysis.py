"""Vectorized Monte-Carlo study of the doubling-walk counterexample.

The program's outer iteration with current inner budget ŷ runs a symmetric
±1 walk from x = 1 that freezes on reaching 2; the run survives the iteration
iff the walk is absorbed at 2 within ŷ + 1 moves (otherwise x - 1 <= 0 ends
the outer loop).  The budget quadruples each iteration (ŷ_i = 4^i · ŷ₀), so
the walks are simulated directly as vectorized prefix-maximum passes instead
of stepping the program label by label.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .simulator import nontermination_lower_bound, stirling_failure_constant

_CHUNK_BUDGET = 4_000_000


def _absorbed_within(rng, n_runs: int, steps: int) -> np.ndarray:
    """Boolean vector: which of n_runs walks from 1 reach 2 within `steps`."""
    absorbed = np.zeros(n_runs, dtype=bool)
    active = np.arange(n_runs)
    pos = np.full(n_runs, 1, dtype=np.int64)
    remaining = steps
    while remaining > 0 and active.size:
        chunk = min(remaining, max(1, _CHUNK_BUDGET // active.size))
        signs = rng.integers(0, 2, size=(active.size, chunk), dtype=np.int8)
        walk = np.cumsum(signs.astype(np.int64) * 2 - 1, axis=1)
        walk += pos[active][:, None]
        hit = (walk >= 2).any(axis=1)
        absorbed[active[hit]] = True
        still = ~hit
        pos[active[still]] = walk[still, -1]
        active = active[still]
        remaining -= chunk
    return absorbed


def approx_absorption_prob(yhat: int) -> float:
    """Float approximation of 1 - 2^-yhat C(yhat, yhat/2) via lgamma, usable
    far beyond exact-arithmetic range."""
    if yhat <= 0 or yhat % 2 != 0:
        raise ValueError(f"need positive even yhat, got {yhat}")
    log_c = (
        math.lgamma(yhat + 1) - 2 * math.lgamma(yhat // 2 + 1) - yhat * math.log(2)
    )
    return 1.0 - math.exp(log_c)


def analyze_ce(y0: int, k: int, runs: int, seed: int) -> dict:
    """Compare the analytic survival lower bound for k outer iterations with
    a Monte-Carlo estimate."""
    bound = nontermination_lower_bound(y0, k)  # validates y0, d < 1
    d = stirling_failure_constant(y0)
    per_iteration = [approx_absorption_prob(y0 * 4**i) for i in range(k)]

    rng = np.random.Generator(np.random.Philox(key=seed))
    alive = runs
    survivors_per_iter: list[int] = []
    if runs > 0:
        alive_mask = np.ones(runs, dtype=bool)
        for i in range(k):
            yhat = y0 * 4**i
            idx = np.flatnonzero(alive_mask)
            if idx.size == 0:
                survivors_per_iter.append(0)
                continue
            absorbed = _absorbed_within(rng, idx.size, yhat + 1)
            alive_mask[idx[~absorbed]] = False
            survivors_per_iter.append(int(alive_mask.sum()))
        alive = int(alive_mask.sum())

    survival = Fraction(alive, runs) if runs else Fraction(1)
    p = float(survival)
    sigma = math.sqrt(p * (1 - p) / runs) if runs else 0.0
    return {
        "y0": y0,
        "k": k,
        "runs": runs,
        "seed": seed,
        "failure_constant_d": d,
        "analytic_lower_bound": bound,
        "per_iteration_absorption": per_iteration,
        "survivors_per_iteration": survivors_per_iter,
        "empirical_survival": survival,
        "empirical_sigma": sigma,
        "agrees": float(survival) >= float(bound) - 3 * sigma,
    }
