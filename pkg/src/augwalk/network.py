"""Reversible walk networks on truncated augmented trees.

Conductances follow the natural normalization with return ratio lambda:

* vertical edge to the parent: c(x, x-) = lambda^(-|x|) * mu(x),
* horizontal edge: the harmonic mean of the two parent-edge conductances.

Every interior vertex then steps up a level versus down a level with
probability ratio exactly lambda.  Conductances are kept in log space and
linearly rescaled by a single global constant, which leaves transition
probabilities untouched; resistance-type quantities undo the scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .augment import AugmentedTree

__all__ = [
    "Network",
    "build_nrw",
    "transition_prob",
    "return_ratio",
    "isoperimetry_profile",
]


@dataclass
class Network:
    """Symmetric conductance network realizing the constant-return-ratio walk.

    ``edges`` lists each undirected edge once; ``conductance`` holds the
    unscaled values, ``log_conductance`` their exact logs, and
    ``solve_conductance = exp(log_conductance - log_scale)`` the uniformly
    rescaled values used inside linear solvers.
    """

    aug: AugmentedTree
    lam: float
    trunc_level: int
    edges: np.ndarray  # (E, 2) global vertex ids
    conductance: np.ndarray  # (E,)
    log_conductance: np.ndarray  # (E,)
    log_scale: float
    solve_conductance: np.ndarray  # (E,)
    total: np.ndarray  # (V,) unscaled total conductance per vertex
    solve_total: np.ndarray  # (V,)
    edge_level: np.ndarray  # (E,) deeper endpoint level, for truncation slicing
    _csr: dict = field(default_factory=dict, repr=False)

    @property
    def tree(self):
        return self.aug.tree

    @property
    def num_vertices(self) -> int:
        return self.tree.level_end(self.trunc_level)

    def edges_within(self, n: int) -> slice:
        """Slice of the edge arrays whose edges live inside X_n (levels <= n)."""
        hi = int(np.searchsorted(self.edge_level, n + 1))
        return slice(0, hi)

    def conductance_matrix(self, n: int | None = None) -> csr_matrix:
        """Symmetric CSR matrix of the rescaled conductances on X_n."""
        if n is None:
            n = self.trunc_level
        if n not in self._csr:
            nv = self.tree.level_end(n)
            sl = self.edges_within(n)
            u, v = self.edges[sl, 0], self.edges[sl, 1]
            c = self.solve_conductance[sl]
            mat = csr_matrix(
                (np.concatenate([c, c]),
                 (np.concatenate([u, v]), np.concatenate([v, u]))),
                shape=(nv, nv),
            )
            self._csr[n] = mat
        return self._csr[n]

    def edge_conductance(self, x: int, y: int) -> float:
        """Unscaled conductance of edge (x, y); 0 if not an edge."""
        mat = self.conductance_matrix()
        val = mat[x, y]
        return float(val) * math.exp(self.log_scale)


def build_nrw(aug: AugmentedTree, lam: float) -> Network:
    """Assemble the conductance network for return ratio ``lam`` in (0,1)."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0,1), got {lam}")
    tree = aug.tree
    n = tree.num_vertices
    log_lam = math.log(lam)

    vert_child = np.arange(1, n, dtype=np.int64)
    vert_parent = tree.parent[1:]
    vert_level = tree.level_of[1:]
    log_c_vert = -vert_level * log_lam + tree.log_measure[1:]

    edges = [np.column_stack([vert_child, vert_parent])]
    log_cond = [log_c_vert]
    edge_level = [vert_level]

    # parent-edge log conductance indexed by vertex (root unused)
    log_up = np.concatenate([[0.0], log_c_vert])
    for m in range(1, tree.max_level + 1):
        e = aug.horizontal[m]
        if len(e) == 0:
            continue
        a = log_up[e[:, 0]]
        b = log_up[e[:, 1]]
        log_h = a + b - np.logaddexp(a, b)
        edges.append(e)
        log_cond.append(log_h)
        edge_level.append(np.full(len(e), m, dtype=np.int64))

    edges = np.vstack(edges)
    log_cond = np.concatenate(log_cond)
    edge_level = np.concatenate(edge_level)
    order = np.argsort(edge_level, kind="stable")
    edges, log_cond, edge_level = edges[order], log_cond[order], edge_level[order]

    log_scale = float(log_cond.max())
    solve_c = np.exp(log_cond - log_scale)
    cond = np.exp(log_cond)

    total = np.zeros(n)
    np.add.at(total, edges[:, 0], cond)
    np.add.at(total, edges[:, 1], cond)
    solve_total = np.zeros(n)
    np.add.at(solve_total, edges[:, 0], solve_c)
    np.add.at(solve_total, edges[:, 1], solve_c)
    if np.any(solve_total <= 0.0):
        raise ValueError("vertex with zero total conductance")

    return Network(
        aug=aug,
        lam=lam,
        trunc_level=tree.max_level,
        edges=edges,
        conductance=cond,
        log_conductance=log_cond,
        log_scale=log_scale,
        solve_conductance=solve_c,
        total=total,
        solve_total=solve_total,
        edge_level=edge_level,
    )


def transition_prob(net: Network, x: int, y: int) -> float:
    """P(x, y) = c(x, y) / m(x); 0 when (x, y) is not an edge."""
    mat = net.conductance_matrix()
    return float(mat[x, y]) / net.solve_total[x]


def transition_row(net: Network, x: int, n: int | None = None) -> np.ndarray:
    """Dense transition probability row of x on the X_n truncation."""
    mat = net.conductance_matrix(n)
    row = np.asarray(mat.getrow(x).todense()).ravel()
    return row / row.sum()


def return_ratio(net: Network, x: int) -> float:
    """Parent-edge conductance over the summed child-edge conductances.

    Equals lambda identically for the natural conductances; a deviation
    flags a corrupted network.
    """
    tree = net.tree
    if x == 0:
        raise ValueError("return ratio is undefined at the root")
    if tree.level_of[x] >= net.trunc_level:
        raise ValueError("vertex at the truncation boundary has no children")
    mat = net.conductance_matrix()
    up = mat[x, int(tree.parent[x])]
    down = sum(mat[x, int(c)] for c in tree.children[x])
    return float(up / down)


def isoperimetry_profile(
    net: Network,
    family: str = "level_truncations",
    seed: int = 0,
    count: int = 20,
) -> list[float]:
    """m(F)/c(boundary F) over a family of finite vertex sets.

    The maximum over a growing family lower-bounds the isoperimetry
    supremum; sets touching the truncation boundary are skipped since
    their true boundary is not visible.
    """
    tree = net.tree
    nv = net.num_vertices
    sets: list[np.ndarray] = []
    if family == "level_truncations":
        for m in range(0, net.trunc_level):
            sets.append(np.arange(tree.level_end(m)))
    elif family == "single_cells":
        sets.extend(
            np.array([v]) for v in range(tree.level_end(net.trunc_level - 1))
        )
    elif family == "random_connected":
        rng = np.random.default_rng(seed)
        mat = net.conductance_matrix()
        for _ in range(count):
            size = int(rng.integers(2, 30))
            start = int(rng.integers(0, tree.level_end(net.trunc_level - 1)))
            blob = {start}
            frontier = [start]
            while frontier and len(blob) < size:
                u = frontier.pop(0)
                row = mat.getrow(u)
                for w in row.indices:
                    if w not in blob and len(blob) < size:
                        blob.add(int(w))
                        frontier.append(int(w))
            sets.append(np.asarray(sorted(blob)))
    else:
        raise ValueError(f"unknown family {family!r}")

    mat = net.conductance_matrix()
    limit = tree.level_end(net.trunc_level - 1)
    values = []
    for f in sets:
        if f.max() >= limit:
            continue  # boundary incomplete at the truncation
        mask = np.zeros(nv, dtype=bool)
        mask[f] = True
        mass = net.solve_total[f].sum()
        sub = mat[f]
        boundary = float(sub[:, ~mask].sum())
        if boundary <= 0:
            values.append(math.inf)
        else:
            values.append(float(mass / boundary))
    return values
