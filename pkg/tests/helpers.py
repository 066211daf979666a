"""Shared independent oracles for the test suite.

Everything here is deliberately written from the defining formulas
(sorted tails, dense grids, brute-force vertex enumeration) without
touching the library's solver internals, so tests cross two routes.
"""

from __future__ import annotations

import numpy as np

from riskq.risk import FiniteDistribution


def cvar_sorted_tail(values, probs, alpha: float) -> float:
    """CVaR of a finite distribution by averaging the worst (1 - alpha)
    probability mass, with a fractional share of the boundary atom."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    order = np.argsort(-values)
    tail = 1.0 - alpha
    remaining = tail
    acc = 0.0
    for i in order:
        take = min(probs[i], remaining)
        acc += take * values[i]
        remaining -= take
        if remaining <= 1e-15:
            break
    return acc / tail


def grid_min_cvar(dist: FiniteDistribution, alpha: float, lo: float, hi: float,
                  n: int = 20001) -> float:
    """min over an eta grid of eta + (1-alpha)^-1 E[(X - eta)+]."""
    c = 1.0 / (1.0 - alpha)
    etas = np.linspace(lo, hi, n)
    hinge = np.maximum(dist.values[None, :] - etas[:, None], 0.0) @ dist.probs
    return float(np.min(etas + c * hinge))


def grid_minmax_semidev(dist: FiniteDistribution, iota: float, lo: float, hi: float,
                        ny: int = 4001, nz: int = 101) -> float:
    """Dense grid min over y of max over z of E[x + iota(x-y)+ + iota z (y-x)]."""
    ys = np.linspace(lo, hi, ny)
    zs = np.linspace(0.0, 1.0, nz)
    mean = dist.mean()
    hinge = np.maximum(dist.values[None, :] - ys[:, None], 0.0) @ dist.probs
    inner = mean + iota * hinge[:, None] + iota * zs[None, :] * (ys[:, None] - mean)
    return float(np.min(inner.max(axis=1)))


def grid_min_oce(dist: FiniteDistribution, *, u, lo: float, hi: float,
                 n: int = 20001) -> float:
    """min over an eta grid of eta - E[u(eta - X)]."""
    etas = np.linspace(lo, hi, n)
    vals = np.array([
        eta - float(dist.probs @ np.array([u(eta - x) for x in dist.values]))
        for eta in etas
    ])
    return float(np.min(vals))


def simplex_vertex_max_kusuoka(dist: FiniteDistribution, alphas, lo: float, hi: float,
                               ny: int = 20001) -> float:
    """max over simplex vertices of the per-level CVaR (each via a y grid)."""
    return max(grid_min_cvar(dist, a, lo, hi, ny) for a in alphas)


def random_distribution(rng: np.random.Generator, max_atoms: int = 20,
                        lo: float = 0.0, hi: float = 1.0) -> FiniteDistribution:
    n = int(rng.integers(1, max_atoms + 1))
    values = rng.uniform(lo, hi, size=n)
    probs = rng.dirichlet(np.ones(n))
    return FiniteDistribution(values, probs)
