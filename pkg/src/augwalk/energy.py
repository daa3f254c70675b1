"""Graph energies, harmonic extension, traces and nonlocal seminorms.

The walk's energy form, evaluated on harmonic extensions of boundary
data, is comparable to a nonlocal quadratic form on the underlying space
whose kernel is 1 / (V(x, y) * rho(x, y)^beta) with V the ball volume and
beta = log(lambda)/log(r0).  This module computes both sides at finite
resolution so the comparability can be watched level by level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._solve import dirichlet_solve, quadratic_energy
from .augment import AugmentedTree
from .network import Network
from .partition import IndexTree

__all__ = [
    "SampledFunction",
    "EnergyReport",
    "sample_function",
    "graph_energy",
    "energy_norm",
    "harmonic_extension",
    "trace",
    "besov_seminorm",
    "upper_dimension",
    "comparability_report",
]


@dataclass
class SampledFunction:
    """Values of a function on the cells of one tree level."""

    level: int
    values: np.ndarray  # aligned with tree.level_ids(level)
    source: str = "samples"  # "closed_form" | "samples"


@dataclass
class EnergyReport:
    level: int
    beta: float
    graph_energy: float
    besov: float

    @property
    def ratio(self) -> float:
        if self.besov <= 0.0:
            return math.nan
        return self.graph_energy / self.besov


def sample_function(
    tree: IndexTree,
    level: int,
    func,
    mode: str = "rep",
    source: str = "closed_form",
) -> SampledFunction:
    """Evaluate a callable on a level: at representatives or cell averages.

    ``cell_average`` averages over the cell sample points, a quadrature
    surrogate for the mu-average.
    """
    ids = tree.level_ids(level)
    if mode == "rep":
        vals = np.array([float(func(tree.rep[v])) for v in ids])
    elif mode == "cell_average":
        vals = np.array(
            [float(np.mean([func(p) for p in tree.samples[v]])) for v in ids]
        )
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    if not np.all(np.isfinite(vals)):
        raise ValueError("function produced non-finite values")
    return SampledFunction(level=level, values=vals, source=source)


def graph_energy(net: Network, f: np.ndarray, level: int | None = None) -> float:
    """(1/2) sum over ordered vertex pairs of c(x,y) |f(x) - f(y)|^2.

    ``f`` must cover every vertex of the X_level truncation.
    """
    if level is None:
        level = net.trunc_level
    nv = net.tree.level_end(level)
    f = np.asarray(f, dtype=float)
    if len(f) < nv:
        raise ValueError("function does not cover the truncation")
    sl = net.edges_within(level)
    e = quadratic_energy(net.edges[sl], net.solve_conductance[sl], f[:nv])
    return e * math.exp(net.log_scale)


def energy_norm(net: Network, f: np.ndarray, weight: float | None = None) -> float:
    """Norm combining a geometrically weighted l2 part with the energy.

    The weight per level defaults to r0^(upper dimension)/2, which keeps
    the l2 part summable on the infinite graph.
    """
    tree = net.tree
    if weight is None:
        weight = 0.5 * tree.r0 ** tree.spec.upper_dimension()
    levels = np.asarray(tree.level_of[: len(f)], dtype=float)
    l2 = float(np.sum(np.asarray(f) ** 2 * weight**levels))
    return math.sqrt(l2 + graph_energy(net, f))


def harmonic_extension(
    net: Network, n: int, boundary: SampledFunction
) -> np.ndarray:
    """Extend level-n cell data harmonically to the levels above.

    Returns values on all of X_n; rows at level n equal the boundary
    data, the rest solve the clamped-harmonic system.  This is the
    finite-level stand-in for integrating the data against the walk's
    boundary kernel.
    """
    if boundary.level != n:
        raise ValueError("boundary data level mismatch")
    tree = net.tree
    ids = tree.level_ids(n)
    if len(boundary.values) != len(ids):
        raise ValueError("boundary data has wrong size")
    cond = net.conductance_matrix(n)
    return dirichlet_solve(cond, ids, boundary.values)


def trace(tree: IndexTree, f: np.ndarray, point, depth: int | None = None):
    """Value of a graph function along the descent chain of a point.

    Returns (value at the deepest chain vertex, oscillation over the last
    three chain vertices); the oscillation is the convergence gap of the
    boundary restriction.
    """
    if depth is None:
        depth = tree.max_level
    chain = tree.descend(point, depth)
    vals = [float(f[v]) for v in chain]
    window = vals[-3:] if len(vals) >= 3 else vals
    return vals[-1], float(max(window) - min(window))


def _ball_volume_matrix(tree: IndexTree, level: int, dist: np.ndarray) -> np.ndarray:
    """V[i, j] = measure of cells within dist[i, j] of cell i's representative."""
    ids = tree.level_ids(level)
    mu = tree.measure[ids]
    order = np.argsort(dist, axis=1, kind="stable")
    v = np.empty_like(dist)
    for i in range(len(ids)):
        d_sorted = dist[i, order[i]]
        cum = np.cumsum(mu[order[i]])
        idx = np.searchsorted(d_sorted, dist[i], side="right") - 1
        v[i] = cum[np.clip(idx, 0, len(cum) - 1)]
    return v


def besov_seminorm(
    tree_or_aug,
    u: SampledFunction,
    beta: float,
) -> float:
    """Discrete nonlocal form: sum of mu_x mu_y |u_x - u_y|^2 / (V rho^beta).

    The double integral is quadratured over ordered cell pairs of the
    data's level, with ball volumes resolved at the same level.  Pairs
    with coincident representatives are skipped with a warning.
    """
    tree = tree_or_aug.tree if isinstance(tree_or_aug, AugmentedTree) else tree_or_aug
    if beta <= 0:
        raise ValueError("beta must be positive")
    ids = tree.level_ids(u.level)
    reps = tree.rep[ids]
    mu = tree.measure[ids]
    vals = np.asarray(u.values, dtype=float)
    diff = reps[:, None, :] - reps[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    offdiag = ~np.eye(len(ids), dtype=bool)
    if np.any((dist == 0.0) & offdiag):
        warnings.warn("coincident representative points; pairs skipped")
    vol = _ball_volume_matrix(tree, u.level, dist)
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = 1.0 / (vol * dist**beta)
    kernel[(dist == 0.0) | ~np.isfinite(kernel)] = 0.0
    du2 = (vals[:, None] - vals[None, :]) ** 2
    weight = mu[:, None] * mu[None, :]
    return float(np.sum(du2 * weight * kernel))


def upper_dimension(spec) -> float:
    """Volume-growth exponent of the model measure (uniform-ratio IFS)."""
    return spec.upper_dimension()


def comparability_report(
    aug: AugmentedTree,
    lam: float,
    func,
    levels,
    mode: str = "rep",
) -> list[EnergyReport]:
    """Graph energy of the harmonic extension versus the nonlocal form.

    For each level n the callable is sampled on the level-n cells, the
    sample is extended harmonically, and both quadratic forms are
    evaluated; their ratio staying in a bounded band across levels is the
    finite-resolution comparability statement.
    """
    from .network import build_nrw

    tree = aug.tree
    beta = math.log(lam) / math.log(tree.r0)
    net = build_nrw(aug, lam)
    out = []
    for n in levels:
        if n > tree.max_level:
            raise ValueError(f"level {n} exceeds the tree truncation")
        u = sample_function(tree, n, func, mode=mode)
        ext = harmonic_extension(net, n, u)
        ge = graph_energy(net, ext, level=n)
        bs = besov_seminorm(tree, u, beta)
        out.append(EnergyReport(level=n, beta=beta, graph_energy=ge, besov=bs))
    return out
