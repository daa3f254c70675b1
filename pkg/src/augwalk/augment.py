"""Augmented trees: index trees plus same-level horizontal edges.

Horizontal edges connect level-m cells whose (sampled) set distance is at
most gamma * r0^m.  The resulting rooted graph has geodesics of an
up-across-down shape, which makes exact distance computation cheap: the
distance between x and y is the minimum over meeting levels l of
(|x| - l) + h_l(x_l, y_l) + (|y| - l), with h_l the BFS distance inside
the level-l horizontal graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .partition import IndexTree

__all__ = [
    "AugmentedTree",
    "GeodesicPath",
    "HyperbolicityReport",
    "build_augmented_tree",
    "graph_distance",
    "canonical_geodesic",
    "gromov_product",
    "boundary_gromov_product",
    "gromov_metric",
    "geodesic_peak_measure",
    "ball_volume",
    "hyperbolicity_report",
]

_PAIR_CHUNK = 4096


@dataclass
class AugmentedTree:
    """Index tree plus per-level symmetric horizontal adjacency."""

    tree: IndexTree
    gamma: float
    horizontal: list  # per level m: (E_m, 2) arrays of global vertex ids, u < v
    _adj: dict = field(default_factory=dict, repr=False)

    @property
    def max_level(self) -> int:
        return self.tree.max_level

    def horizontal_edge_count(self, m: int) -> int:
        return len(self.horizontal[m])

    def level_adjacency(self, m: int):
        """CSR adjacency of the level-m horizontal graph in local indices."""
        if m not in self._adj:
            ids = self.tree.level_ids(m)
            n = len(ids)
            base = self.tree.level_start[m]
            e = self.horizontal[m]
            if len(e) == 0:
                mat = csr_matrix((n, n), dtype=np.int8)
            else:
                u = e[:, 0] - base
                v = e[:, 1] - base
                data = np.ones(2 * len(e), dtype=np.int8)
                mat = csr_matrix(
                    (data, (np.concatenate([u, v]), np.concatenate([v, u]))),
                    shape=(n, n),
                )
            self._adj[m] = mat
        return self._adj[m]

    def horizontal_neighbors(self, v: int) -> np.ndarray:
        m = int(self.tree.level_of[v])
        adj = self.level_adjacency(m)
        base = self.tree.level_start[m]
        loc = v - base
        return adj.indices[adj.indptr[loc]:adj.indptr[loc + 1]] + base

    def max_degree(self, m: int) -> int:
        adj = self.level_adjacency(m)
        deg = np.diff(adj.indptr)
        vertical = 0 if m == 0 else 1
        kids = [len(self.tree.children[v]) for v in self.tree.level_ids(m)]
        return int((deg + vertical + np.asarray(kids)).max())


@dataclass
class GeodesicPath:
    vertices: list[int]
    up_len: int
    horiz_len: int
    down_len: int
    horiz_level: int

    @property
    def length(self) -> int:
        return self.up_len + self.horiz_len + self.down_len


@dataclass
class HyperbolicityReport:
    max_horiz_geodesic: int
    delta_sample: float
    levels_scanned: int
    per_level: list[int]


def _cell_radii(tree: IndexTree, ids: np.ndarray) -> np.ndarray:
    out = np.empty(len(ids))
    for k, v in enumerate(ids):
        d = tree.samples[v] - tree.rep[v][None, :]
        out[k] = math.sqrt(float((d**2).sum(axis=1).max()))
    return out


def _level_edges(tree: IndexTree, m: int, gamma: float) -> np.ndarray:
    """Pairs of level-m vertices with sampled set distance <= gamma * r0^m.

    All cell samples of the level go into one spatial index; cross-cell
    sample pairs within the cutoff identify the adjacent cells directly.
    """
    from scipy.spatial import cKDTree

    ids = tree.level_ids(m)
    n = len(ids)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    cutoff = gamma * tree.r0**m
    counts = np.array([len(tree.samples[v]) for v in ids])
    flat = np.concatenate([tree.samples[v] for v in ids])
    labels = np.repeat(ids, counts)
    kdt = cKDTree(flat)
    close = kdt.query_pairs(r=cutoff * (1.0 + 1e-12), output_type="ndarray")
    if len(close) == 0:
        return np.empty((0, 2), dtype=np.int64)
    cu = labels[close[:, 0]]
    cv = labels[close[:, 1]]
    cross = cu != cv
    if not np.any(cross):
        return np.empty((0, 2), dtype=np.int64)
    pairs = np.column_stack([cu[cross], cv[cross]])
    pairs.sort(axis=1)
    pairs = np.unique(pairs, axis=0)
    return pairs


def build_augmented_tree(tree: IndexTree, gamma: float | None = None) -> AugmentedTree:
    """Add horizontal edges at threshold gamma (default 0.5 * r0).

    Raises if the result is not pre-augmented (an edge whose parent cells
    are neither equal nor adjacent), which signals inconsistent sampling
    or an unsuitable gamma.
    """
    if gamma is None:
        gamma = tree.spec.gamma if tree.spec is not None and tree.spec.gamma else None
    if gamma is None:
        gamma = 0.5 * tree.r0
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    horizontal = [np.empty((0, 2), dtype=np.int64)]
    for m in range(1, tree.max_level + 1):
        horizontal.append(_level_edges(tree, m, gamma))

    # pre-augmented property: parents of adjacent cells are equal or adjacent
    for m in range(2, tree.max_level + 1):
        e = horizontal[m]
        if len(e) == 0:
            continue
        pu = tree.parent[e[:, 0]]
        pv = tree.parent[e[:, 1]]
        diff = pu != pv
        if not np.any(diff):
            continue
        prev = horizontal[m - 1]
        nprev = tree.num_vertices
        have = set((min(a, b) * nprev + max(a, b)) for a, b in prev)
        bad = [
            (int(e[k, 0]), int(e[k, 1]))
            for k in np.nonzero(diff)[0]
            if (min(pu[k], pv[k]) * nprev + max(pu[k], pv[k])) not in have
        ]
        if bad:
            raise ValueError(
                f"pre-augmented property violated at level {m} for pairs {bad[:5]}; "
                "gamma or cell samples are inconsistent across levels"
            )
    return AugmentedTree(tree=tree, gamma=float(gamma), horizontal=horizontal)


# -- distances and geodesics ---------------------------------------------------


def _ancestors(tree: IndexTree, v: int) -> list[int]:
    """Chain [v, parent(v), ..., root]."""
    chain = [int(v)]
    while tree.parent[chain[-1]] >= 0:
        chain.append(int(tree.parent[chain[-1]]))
    return chain


def _bfs_capped(aug: AugmentedTree, m: int, src: int, dst: int, cap: int):
    """BFS distance from src to dst inside level m, or None if > cap."""
    if src == dst:
        return 0
    if cap < 1:
        return None
    adj = aug.level_adjacency(m)
    base = aug.tree.level_start[m]
    indptr, indices = adj.indptr, adj.indices
    s, t = src - base, dst - base
    seen = {s}
    frontier = [s]
    dist = 0
    while frontier and dist < cap:
        dist += 1
        nxt = []
        for u in frontier:
            for w in indices[indptr[u]:indptr[u + 1]]:
                w = int(w)
                if w == t:
                    return dist
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return None


def graph_distance(aug: AugmentedTree, x: int, y: int) -> int:
    """Exact graph distance in the augmented tree.

    Minimizes vertical cost plus capped horizontal BFS over all meeting
    levels; the cap shrinks as better routes are found, so the search
    stays exact without scanning whole levels unnecessarily.
    """
    if x == y:
        return 0
    tree = aug.tree
    ax = _ancestors(tree, x)
    ay = _ancestors(tree, y)
    lx, ly = len(ax) - 1, len(ay) - 1
    lmin = min(lx, ly)
    # deepest level where the ancestors coincide
    meet = lmin
    while ax[lx - meet] != ay[ly - meet]:
        meet -= 1
    best = (lx - meet) + (ly - meet)
    for lev in range(lmin, meet, -1):
        vertical = (lx - lev) + (ly - lev)
        cap = best - vertical - 1
        if cap < 1:
            continue
        h = _bfs_capped(aug, lev, ax[lx - lev], ay[ly - lev], cap)
        if h is not None:
            best = vertical + h
    return int(best)


def _bfs_path(aug: AugmentedTree, m: int, src: int, dst: int) -> list[int]:
    """A shortest horizontal path, ties resolved to the lowest vertex id."""
    if src == dst:
        return [src]
    adj = aug.level_adjacency(m)
    base = aug.tree.level_start[m]
    n = adj.shape[0]
    indptr, indices = adj.indptr, adj.indices
    s, t = src - base, dst - base
    dist = np.full(n, -1, dtype=np.int64)
    dist[s] = 0
    frontier = [s]
    while frontier and dist[t] < 0:
        nxt = []
        for u in frontier:
            for w in indices[indptr[u]:indptr[u + 1]]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    nxt.append(int(w))
        frontier = nxt
    if dist[t] < 0:
        raise ValueError("horizontal path requested between disconnected cells")
    path = [t]
    while path[-1] != s:
        u = path[-1]
        preds = [
            int(w) for w in indices[indptr[u]:indptr[u + 1]] if dist[w] == dist[u] - 1
        ]
        path.append(min(preds))
    return [int(p) + base for p in reversed(path)]


def canonical_geodesic(aug: AugmentedTree, x: int, y: int) -> GeodesicPath:
    """Geodesic of minimal length whose horizontal segment sits lowest.

    Among all up-across-down geodesics realizing graph_distance(x, y) the
    one with the smallest horizontal level is returned; the horizontal
    part follows BFS predecessors with lowest-id tie-breaking.
    """
    tree = aug.tree
    ax = _ancestors(tree, x)
    ay = _ancestors(tree, y)
    lx, ly = len(ax) - 1, len(ay) - 1
    lmin = min(lx, ly)
    meet = lmin
    while ax[lx - meet] != ay[ly - meet]:
        meet -= 1
    best = graph_distance(aug, x, y)
    for lev in range(meet, lmin + 1):
        vertical = (lx - lev) + (ly - lev)
        if vertical > best:
            continue
        if lev == meet:
            h = 0 if vertical == best else None
        else:
            h = _bfs_capped(aug, lev, ax[lx - lev], ay[ly - lev], best - vertical)
            if h is not None and vertical + h != best:
                h = None
        if h is None:
            continue
        up = ax[: lx - lev + 1]
        down = ay[: ly - lev + 1]
        if h == 0:
            vertices = up + down[-2::-1]
        else:
            mid = _bfs_path(aug, lev, ax[lx - lev], ay[ly - lev])
            vertices = up[:-1] + mid + down[-2::-1]
        return GeodesicPath(
            vertices=[int(v) for v in vertices],
            up_len=lx - lev,
            horiz_len=int(h),
            down_len=ly - lev,
            horiz_level=int(lev),
        )
    raise RuntimeError("no geodesic found; distance computation inconsistent")


def gromov_product(aug: AugmentedTree, x: int, y: int) -> float:
    """(|x| + |y| - d(x, y)) / 2."""
    tree = aug.tree
    lx, ly = int(tree.level_of[x]), int(tree.level_of[y])
    return 0.5 * (lx + ly - graph_distance(aug, x, y))


def boundary_gromov_product(aug, xi, eta, depth: int) -> float:
    """Gromov product of the depth-level cells tracking two points.

    Approximates the product of the boundary points; the value differs
    from the geodesic-ray supremum by at most 1.  The two points must be
    distinct, otherwise the product grows without bound in depth.
    """
    tree = aug.tree
    cx = tree.descend(xi, depth)
    cy = tree.descend(eta, depth)
    return gromov_product(aug, cx[-1], cy[-1])


def gromov_metric(aug: AugmentedTree, a: float, x: int, y: int) -> float:
    """exp(-a * (x|y)); a quasi-metric on the graph for a > 0."""
    if a <= 0:
        raise ValueError("metric parameter must be positive")
    if x == y:
        return 0.0
    return math.exp(-a * gromov_product(aug, x, y))


def geodesic_peak_measure(aug: AugmentedTree, x: int, y: int) -> float:
    """Largest cell measure seen along the canonical geodesic from x to y."""
    if x == y:
        raise ValueError("vertices must differ")
    path = canonical_geodesic(aug, x, y)
    return float(aug.tree.measure[path.vertices].max())


def ball_volume(tree_or_aug, xi, r: float, resolution_level: int) -> float:
    """Measure of the r-ball around xi, resolved at a fixed tree level.

    Sums the measures of resolution-level cells whose representative lies
    within r; the radius bias is O(r0^resolution_level).
    """
    tree = tree_or_aug.tree if isinstance(tree_or_aug, AugmentedTree) else tree_or_aug
    if r <= 0:
        raise ValueError("radius must be positive")
    if resolution_level > tree.max_level:
        raise ValueError("resolution level exceeds the truncation")
    ids = tree.level_ids(resolution_level)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    d = np.sqrt(((tree.rep[ids] - xi[None, :]) ** 2).sum(axis=1))
    return float(tree.measure[ids][d <= r].sum())


# -- hyperbolicity -------------------------------------------------------------


def level_distance_matrices(aug: AugmentedTree, max_level: int):
    """Per-level horizontal BFS distances h_m and true distances D_m.

    D_m(u, v) is the full graph distance between same-level vertices,
    computed by the downward recursion D_m = min(h_m, D_{m-1}[parents] + 2).
    """
    tree = aug.tree
    h_mats = [np.zeros((1, 1))]
    d_mats = [np.zeros((1, 1))]
    for m in range(1, max_level + 1):
        adj = aug.level_adjacency(m)
        h = shortest_path(adj, method="D", unweighted=True)
        ids = tree.level_ids(m)
        pidx = tree.parent[ids] - tree.level_start[m - 1]
        up = d_mats[m - 1][np.ix_(pidx, pidx)] + 2.0
        d_mats.append(np.minimum(h, up))
        h_mats.append(h)
    return h_mats, d_mats


def hyperbolicity_report(
    aug: AugmentedTree,
    max_level: int | None = None,
    sample_size: int = 300,
    seed: int = 0,
) -> HyperbolicityReport:
    """Exact horizontal-geodesic bound per level plus a sampled delta.

    A horizontal path is a geodesic segment when its BFS length equals the
    full graph distance between its endpoints; the per-level maximum of
    such lengths staying bounded is the hyperbolicity criterion for
    pre-augmented trees.
    """
    tree = aug.tree
    if max_level is None:
        max_level = tree.max_level
    h_mats, d_mats = level_distance_matrices(aug, max_level)
    per_level = []
    for m in range(1, max_level + 1):
        h, d = h_mats[m], d_mats[m]
        finite = np.isfinite(h)
        geod = finite & (h == d)
        per_level.append(int(h[geod].max()) if np.any(geod) else 0)

    rng = np.random.default_rng(seed)
    nverts = tree.level_end(max_level)
    delta = 0.0
    for _ in range(sample_size):
        x, y, z = (int(v) for v in rng.integers(0, nverts, size=3))
        gxy = gromov_product(aug, x, y)
        gxz = gromov_product(aug, x, z)
        gzy = gromov_product(aug, z, y)
        delta = max(delta, min(gxz, gzy) - gxy)
    return HyperbolicityReport(
        max_horiz_geodesic=max(per_level) if per_level else 0,
        delta_sample=float(max(delta, 0.0)),
        levels_scanned=max_level,
        per_level=per_level,
    )
