"""Hitting distributions, visiting probabilities and boundary kernels.

All quantities are computed by absorbing-state linear solves on level
truncations.  Since edges only connect equal or adjacent levels, a walk
started inside X_{m-1} cannot touch level m+1 before level m, so hitting
probabilities onto a level are exact and free of truncation error; the
kernels F, G, K, Theta do depend on the absorbing shell and are returned
together with the gap between the last two truncations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._solve import dirichlet_solve
from .network import Network

__all__ = [
    "KernelEstimate",
    "WalkPath",
    "hitting_distribution",
    "visit_vector",
    "ever_visit",
    "green",
    "green_diagonal",
    "martin_kernel",
    "naim_kernel",
    "simulate_walk",
    "sample_hitting_counts",
]

ROOT = 0


@dataclass
class KernelEstimate:
    value: float
    trunc_level: int
    convergence_gap: float


@dataclass
class WalkPath:
    states: list[int]
    seed: int
    stopped_reason: str  # "hit_level" | "max_steps"


def hitting_distribution(net: Network, m: int) -> np.ndarray:
    """Exact law of the first level-m visit for the walk started at the root.

    Returned as a vector aligned with ``tree.level_ids(m)``.  For the
    natural conductances this equals the cell measures.
    """
    tree = net.tree
    if not 1 <= m <= net.trunc_level:
        raise ValueError("level out of range")
    ids = tree.level_ids(m)
    cond = net.conductance_matrix(m)
    interior = tree.level_end(m - 1)
    if interior == 1:
        # root only: one step distributes proportionally to conductances
        row = np.asarray(cond.getrow(ROOT).todense()).ravel()
        return row[ids] / row.sum()
    lap = cond[:interior, :interior]
    from scipy.sparse import diags

    deg = np.asarray(cond.sum(axis=1)).ravel()[:interior]
    lap = diags(deg) - lap
    e0 = np.zeros(interior)
    e0[ROOT] = 1.0
    from scipy.sparse.linalg import spsolve

    z = spsolve(lap.tocsc(), e0)
    absorb = cond[:interior, ids[0]:ids[-1] + 1]
    return np.asarray(z @ absorb).ravel()


def visit_vector(net: Network, y: int, trunc: int) -> np.ndarray:
    """Probability of visiting y before level ``trunc``, from every vertex.

    Vector over X_trunc with value 1 at y and 0 on the absorbing level.
    """
    tree = net.tree
    if trunc > net.trunc_level:
        raise ValueError("truncation exceeds the built network")
    if tree.level_of[y] >= trunc:
        raise ValueError("target must lie strictly inside the truncation")
    cond = net.conductance_matrix(trunc)
    shell = tree.level_ids(trunc)
    fixed = np.concatenate([[y], shell])
    vals = np.concatenate([[1.0], np.zeros(len(shell))])
    return dirichlet_solve(cond, fixed, vals)


def ever_visit(net: Network, x: int, y: int, trunc: int) -> KernelEstimate:
    """F(x, y): probability of ever visiting y, within the truncation.

    Nondecreasing in ``trunc``; the gap against the next-smaller truncation
    is reported so callers can judge convergence.
    """
    if x == y:
        return KernelEstimate(1.0, trunc, 0.0)
    u_now = visit_vector(net, y, trunc)
    value = float(u_now[x])
    gap = 0.0
    if trunc - 1 > max(net.tree.level_of[x], net.tree.level_of[y]):
        u_prev = visit_vector(net, y, trunc - 1)
        gap = abs(value - float(u_prev[x]))
    return KernelEstimate(value, trunc, gap)


def _green_diag(net: Network, y: int, u: np.ndarray, trunc: int) -> float:
    """G(y, y) = 1 / (1 - return probability before absorption)."""
    cond = net.conductance_matrix(trunc)
    row = cond.getrow(y)
    ret = float(row.data @ u[row.indices]) / net.solve_total[y]
    if ret >= 1.0:
        raise FloatingPointError("return probability reached 1; walk not transient")
    return 1.0 / (1.0 - ret)


def green_diagonal(net: Network, y: int, trunc: int) -> float:
    return _green_diag(net, y, visit_vector(net, y, trunc), trunc)


def green(net: Network, x: int, y: int, trunc: int) -> KernelEstimate:
    """G(x, y) = F(x, y) * G(y, y) on the truncation."""
    u = visit_vector(net, y, trunc)
    gyy = _green_diag(net, y, u, trunc)
    value = float(u[x]) * gyy if x != y else gyy
    gap = 0.0
    if trunc - 1 > max(net.tree.level_of[x], net.tree.level_of[y]):
        u2 = visit_vector(net, y, trunc - 1)
        g2 = _green_diag(net, y, u2, trunc - 1)
        prev = float(u2[x]) * g2 if x != y else g2
        gap = abs(value - prev)
    return KernelEstimate(value, trunc, gap)


def martin_kernel(net: Network, x: int, y: int, trunc: int) -> KernelEstimate:
    """K(x, y) = G(x, y)/G(root, y) = F(x, y)/F(root, y)."""
    u = visit_vector(net, y, trunc)
    denom = float(u[ROOT]) if y != ROOT else 1.0
    if denom <= 0.0:
        raise FloatingPointError("vanishing F(root, y); kernel undefined")
    numer = float(u[x]) if x != y else 1.0
    value = numer / denom
    gap = 0.0
    if trunc - 1 > max(net.tree.level_of[x], net.tree.level_of[y]):
        u2 = visit_vector(net, y, trunc - 1)
        d2 = float(u2[ROOT]) if y != ROOT else 1.0
        n2 = float(u2[x]) if x != y else 1.0
        if d2 > 0:
            gap = abs(value - n2 / d2)
    return KernelEstimate(value, trunc, gap)


def naim_kernel(net: Network, x: int, y: int, trunc: int) -> KernelEstimate:
    """Theta(x, y) = F(x, y) / (F(x, root) G(root, root) F(root, y)).

    Symmetric in (x, y) up to solver tolerance; x and y must differ from
    the root.
    """
    if x == ROOT or y == ROOT:
        raise ValueError("kernel arguments must differ from the root")

    def compute(tr):
        u_y = visit_vector(net, y, tr)
        u_root = visit_vector(net, ROOT, tr)
        g_root = _green_diag(net, ROOT, u_root, tr)
        f_xy = float(u_y[x]) if x != y else 1.0
        f_x_root = float(u_root[x])
        f_root_y = float(u_y[ROOT])
        if f_x_root <= 0 or f_root_y <= 0:
            raise FloatingPointError("underflow in visiting probabilities")
        return f_xy / (f_x_root * g_root * f_root_y)

    value = compute(trunc)
    gap = 0.0
    if trunc - 1 > max(net.tree.level_of[x], net.tree.level_of[y]):
        gap = abs(value - compute(trunc - 1))
    return KernelEstimate(value, trunc, gap)


# -- simulation ----------------------------------------------------------------


def _dense_cumulative(net: Network, n_level: int):
    cond = net.conductance_matrix(n_level).toarray()
    totals = cond.sum(axis=1)
    rows = cond / totals[:, None]
    return np.cumsum(rows, axis=1)


def simulate_walk(
    net: Network,
    x0: int,
    stop_level: int | None = None,
    max_steps: int | None = None,
    seed: int = 0,
) -> WalkPath:
    """One sampled trajectory, reproducible per seed.

    Stops on first visit to ``stop_level`` or after ``max_steps`` moves,
    whichever comes first; hitting the truncation boundary also stops the
    walk and is recorded.
    """
    if stop_level is None and max_steps is None:
        raise ValueError("need a stop level or a step budget")
    tree = net.tree
    level_cap = stop_level if stop_level is not None else net.trunc_level
    rng = np.random.default_rng(seed)
    cum = _dense_cumulative(net, min(level_cap, net.trunc_level))
    states = [int(x0)]
    reason = "max_steps"
    steps = 0
    while max_steps is None or steps < max_steps:
        v = states[-1]
        if stop_level is not None and tree.level_of[v] >= stop_level:
            reason = "hit_level"
            break
        if stop_level is None and tree.level_of[v] >= net.trunc_level:
            # rows at the truncation misrepresent the infinite chain
            reason = "hit_truncation"
            break
        nxt = int(np.searchsorted(cum[v], rng.random(), side="right"))
        states.append(nxt)
        steps += 1
    return WalkPath(states=states, seed=seed, stopped_reason=reason)


def sample_hitting_counts(
    net: Network,
    m: int,
    trials: int,
    seed: int = 0,
    x0: int = ROOT,
) -> np.ndarray:
    """Empirical first-visit counts on level m over many walks from x0.

    Walks are stepped in lockstep with one generator, so the result is a
    deterministic function of the seed.  Returns counts aligned with
    ``tree.level_ids(m)``.
    """
    tree = net.tree
    nv = tree.level_end(m)
    if nv > 20000:
        raise ValueError("truncation too large for dense simulation")
    cum = _dense_cumulative(net, m)
    rng = np.random.default_rng(seed)
    states = np.full(trials, x0, dtype=np.int64)
    active = tree.level_of[states] < m
    while np.any(active):
        idx = np.nonzero(active)[0]
        r = rng.random(len(idx))
        rows = cum[states[idx]]
        states[idx] = (r[:, None] < rows).argmax(axis=1)
        active[idx] = tree.level_of[states[idx]] < m
    ids = tree.level_ids(m)
    counts = np.zeros(len(ids), dtype=np.int64)
    np.add.at(counts, states - ids[0], 1)
    return counts
