"""Index trees: leveled cell partitions of a compact metric measure space.

A tree vertex at level m stands for a compact cell of diameter ~ r0^m.
Vertices carry the cell measure, a representative point, and a finite
sample of the cell used for set-distance computations.  Two builders are
provided: symbolic trees for IFS attractors and greedy-net trees for
finite point clouds.  Vertex ids are assigned level by level, so the ids
of the first n+1 levels always form the contiguous range [0, level_end(n)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .models import ModelSpec

__all__ = [
    "IndexTree",
    "PartitionReport",
    "build_ifs_tree",
    "build_net_tree",
    "build_tree",
    "verify_partition",
]

ROOT = 0

# Refinement depth of the per-cell sample sets.  Sampled set distances
# overestimate true distances by at most 2 * diam(K) * r0^(level + depth).
DEFAULT_BASE_DEPTH = 3


@dataclass
class IndexTree:
    """Leveled partition tree with cell measures and representatives."""

    kind: str
    r0: float
    max_level: int
    dim: int
    level_start: np.ndarray  # (max_level + 2,) id offsets per level
    level_of: np.ndarray  # (V,)
    parent: np.ndarray  # (V,) vertex id of the parent, -1 at the root
    measure: np.ndarray  # (V,)
    log_measure: np.ndarray  # (V,)
    rep: np.ndarray  # (V, dim)
    words: list  # ifs: tuple of 0-based symbols; net: cloud point index
    samples: list  # per-vertex (k, dim) arrays
    children: list  # per-vertex arrays of child ids
    spec: ModelSpec | None = None
    meta: dict = field(default_factory=dict)

    @property
    def num_vertices(self) -> int:
        return len(self.parent)

    def level_ids(self, m: int) -> np.ndarray:
        return np.arange(self.level_start[m], self.level_start[m + 1])

    def level_end(self, m: int) -> int:
        """Number of vertices in levels 0..m."""
        return int(self.level_start[m + 1])

    def word_string(self, v: int) -> str:
        w = self.words[v]
        if isinstance(w, tuple):
            return "".join(str(i + 1) for i in w)
        return str(w)

    def vertex_by_word(self, word: str) -> int:
        """Look up an IFS vertex by its 1-based symbol string (e.g. "12")."""
        if self.kind != "ifs":
            raise ValueError("word lookup is only available on IFS trees")
        key = tuple(int(ch) - 1 for ch in word)
        try:
            return self.meta["word_index"][key]
        except KeyError:
            raise KeyError(f"no vertex with word {word!r}") from None

    def ancestor_at_level(self, v: int, m: int) -> int:
        while self.level_of[v] > m:
            v = self.parent[v]
        if self.level_of[v] != m:
            raise ValueError(f"vertex {v} has no ancestor at level {m}")
        return int(v)

    def sample_distance(self, x: int, y: int) -> float:
        """Distance between the cell samples of x and y (>= true set distance)."""
        a, b = self.samples[x], self.samples[y]
        diff = a[:, None, :] - b[None, :, :]
        return float(np.sqrt((diff**2).sum(axis=2).min()))

    def point_cell_distance(self, v: int, point: np.ndarray) -> float:
        d = self.samples[v] - np.asarray(point, dtype=float)[None, :]
        return float(np.sqrt((d**2).sum(axis=1).min()))

    def descend(self, point, depth: int) -> list[int]:
        """Chain of cells [root, x_1, ..., x_depth] tracking ``point``.

        At each level the child whose sample set is closest to the point is
        chosen (ties broken by lowest vertex id), so the chain is the
        parent-linked geodesic ray of the point in the tree.
        """
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if depth > self.max_level:
            raise ValueError(f"depth {depth} exceeds max_level {self.max_level}")
        chain = [ROOT]
        for _ in range(depth):
            kids = self.children[chain[-1]]
            if len(kids) == 0:
                raise ValueError("descent hit a vertex without children")
            dists = [self.point_cell_distance(int(c), point) for c in kids]
            chain.append(int(kids[int(np.argmin(dists))]))
        return chain

    def descendants_at_level(self, v: int, m: int) -> np.ndarray:
        """All level-m vertices below v (v itself if level_of[v] == m)."""
        if self.level_of[v] > m:
            raise ValueError("vertex lies below the requested level")
        frontier = [int(v)]
        while frontier and self.level_of[frontier[0]] < m:
            frontier = [int(c) for u in frontier for c in self.children[u]]
        return np.array(sorted(frontier), dtype=np.int64)

    # -- JSON ----------------------------------------------------------------

    def to_dict(self, include_samples: bool = True) -> dict:
        d = {
            "kind": self.kind,
            "r0": self.r0,
            "max_level": self.max_level,
            "dim": self.dim,
            "level_start": self.level_start.tolist(),
            "parent": self.parent.tolist(),
            "measure": self.measure.tolist(),
            "rep": self.rep.tolist(),
            "words": [list(w) if isinstance(w, tuple) else w for w in self.words],
            "spec": self.spec.to_dict() if self.spec is not None else None,
        }
        if include_samples:
            d["samples"] = [s.tolist() for s in self.samples]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IndexTree":
        parent = np.asarray(d["parent"], dtype=np.int64)
        level_start = np.asarray(d["level_start"], dtype=np.int64)
        n = len(parent)
        level_of = np.zeros(n, dtype=np.int64)
        for m in range(len(level_start) - 1):
            level_of[level_start[m]:level_start[m + 1]] = m
        measure = np.asarray(d["measure"], dtype=float)
        kind = d["kind"]
        words = [tuple(w) if kind == "ifs" else w for w in d["words"]]
        rep = np.asarray(d["rep"], dtype=float)
        if "samples" in d:
            samples = [np.asarray(s, dtype=float) for s in d["samples"]]
        else:
            samples = [rep[v:v + 1] for v in range(n)]
        spec = ModelSpec.from_dict(d["spec"]) if d.get("spec") else None
        tree = cls(
            kind=kind,
            r0=float(d["r0"]),
            max_level=int(d["max_level"]),
            dim=int(d["dim"]),
            level_start=level_start,
            level_of=level_of,
            parent=parent,
            measure=measure,
            log_measure=np.log(measure),
            rep=rep,
            words=words,
            samples=samples,
            children=_children_from_parent(parent),
            spec=spec,
        )
        if kind == "ifs":
            tree.meta["word_index"] = {w: i for i, w in enumerate(words)}
        return tree

    def save(self, path, include_samples: bool = True) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(include_samples=include_samples), fh)

    @classmethod
    def load(cls, path) -> "IndexTree":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _children_from_parent(parent: np.ndarray) -> list:
    kids: list[list[int]] = [[] for _ in range(len(parent))]
    for v, p in enumerate(parent):
        if p >= 0:
            kids[p].append(v)
    return [np.asarray(k, dtype=np.int64) for k in kids]


# -- IFS builder --------------------------------------------------------------


def _base_sample(spec: ModelSpec, depth: int) -> np.ndarray:
    """Refinements of the map fixed points: {S_w(f_j) : |w| = depth, j}.

    Contains every map fixed point exactly, so cells that share such a
    point get sampled set distance 0.
    """
    pts = spec.fixed_points()
    for _ in range(depth):
        pts = np.vstack([s(pts) for s in spec.maps])
    return pts


def build_ifs_tree(
    spec: ModelSpec,
    max_level: int,
    base_depth: int = DEFAULT_BASE_DEPTH,
) -> IndexTree:
    """Symbolic index tree of an IFS attractor, truncated at ``max_level``.

    Level m holds the words x with r_x <= r0^m < r_(x minus last symbol),
    where r0 is the minimal contraction ratio; cell measures are the weight
    products along the word and are exact.
    """
    if spec.kind != "ifs":
        raise ValueError("build_ifs_tree needs an IFS model")
    if max_level < 1:
        raise ValueError("max_level must be >= 1")
    maps = spec.maps
    weights = np.asarray(spec.weights, dtype=float)
    log_ratio = np.array([math.log(s.ratio) for s in maps])
    r0 = spec.r0
    log_r0 = math.log(r0)
    dim = spec.dim
    base = _base_sample(spec, base_depth)
    z0 = np.asarray(spec.base_point, dtype=float)

    words: list[tuple] = [()]
    parents: list[int] = [-1]
    measures: list[float] = [1.0]
    log_measures: list[float] = [0.0]
    level_start = [0, 1]
    # per-vertex affine parts of S_x (matrix includes the ratio)
    mats: list[np.ndarray] = [np.eye(dim)]
    offs: list[np.ndarray] = [np.zeros(dim)]
    logr: list[float] = [0.0]

    for m in range(1, max_level + 1):
        threshold = m * log_r0 + 1e-12
        new_start = len(words)
        for pid in range(level_start[m - 1], level_start[m]):
            # expand the word of pid until the composed ratio drops below
            # r0^m; stack entries always have ratio above the threshold
            stack = [(words[pid], logr[pid], mats[pid], offs[pid],
                      measures[pid], log_measures[pid])]
            while stack:
                word, lr, A, b, mu, lmu = stack.pop()
                deeper = []
                for i, s in enumerate(maps):
                    w2 = word + (i,)
                    lr2 = lr + log_ratio[i]
                    A2 = A @ (s.ratio * s.matrix)
                    b2 = A @ s.offset + b
                    mu2 = mu * weights[i]
                    lmu2 = lmu + math.log(weights[i])
                    if lr2 <= threshold:
                        words.append(w2)
                        parents.append(pid)
                        measures.append(mu2)
                        log_measures.append(lmu2)
                        mats.append(A2)
                        offs.append(b2)
                        logr.append(lr2)
                    else:
                        deeper.append((w2, lr2, A2, b2, mu2, lmu2))
                # deterministic expansion: symbol order, depth first
                stack.extend(reversed(deeper))
        level_start.append(len(words))
        if len(words) == new_start:
            raise RuntimeError("level construction produced an empty level")

    n = len(words)
    mats_arr = np.stack(mats)
    offs_arr = np.stack(offs)
    rep = np.einsum("vij,j->vi", mats_arr, z0) + offs_arr
    samples = [base @ mats_arr[v].T + offs_arr[v] for v in range(n)]
    level_start_arr = np.asarray(level_start, dtype=np.int64)
    level_of = np.zeros(n, dtype=np.int64)
    for m in range(max_level + 1):
        level_of[level_start_arr[m]:level_start_arr[m + 1]] = m
    parent_arr = np.asarray(parents, dtype=np.int64)
    tree = IndexTree(
        kind="ifs",
        r0=r0,
        max_level=max_level,
        dim=dim,
        level_start=level_start_arr,
        level_of=level_of,
        parent=parent_arr,
        measure=np.asarray(measures),
        log_measure=np.asarray(log_measures),
        rep=rep,
        words=words,
        samples=samples,
        children=_children_from_parent(parent_arr),
        spec=spec,
    )
    tree.meta["word_index"] = {w: i for i, w in enumerate(words)}
    tree.meta["base_depth"] = base_depth
    tree.meta["map_matrix"] = mats_arr
    tree.meta["map_offset"] = offs_arr
    return tree


# -- point-cloud builder -------------------------------------------------------


def _greedy_net(points: np.ndarray, eps: float) -> np.ndarray:
    """Indices of a maximal eps-separated subset, scanning in index order."""
    chosen: list[int] = []
    coords = np.empty((0, points.shape[1]))
    for i, p in enumerate(points):
        if len(chosen) == 0:
            chosen.append(i)
            coords = points[i:i + 1]
            continue
        d2 = ((coords - p[None, :]) ** 2).sum(axis=1)
        if d2.min() >= eps * eps:
            chosen.append(i)
            coords = np.vstack([coords, points[i:i + 1]])
    return np.asarray(chosen, dtype=np.int64)


def net_parameters_valid(c_rho: float, r0: float, b: float) -> bool:
    """Packing/covering compatibility: C^3 r0/(1 - C r0) + C^2 b <= 1/2."""
    if not (0.0 < r0 < 1.0) or b <= 0:
        return False
    if c_rho * r0 >= 1.0:
        return False
    return c_rho**3 * r0 / (1.0 - c_rho * r0) + c_rho**2 * b <= 0.5 + 1e-12


def build_net_tree(
    spec: ModelSpec,
    r0: float,
    b: float,
    max_level: int,
) -> IndexTree:
    """Greedy-net index tree over a finite weighted point cloud.

    Level-m cells are the groups of cloud points reached by nearest-net
    descent: each point walks down the tree, at every level picking the
    nearest child net point of its current cell (ties to the lowest cloud
    index).  Assignment is exclusive, so sibling measures add up to the
    parent measure exactly.
    """
    if spec.kind != "pointcloud":
        raise ValueError("build_net_tree needs a point-cloud model")
    if max_level < 1:
        raise ValueError("max_level must be >= 1")
    if not net_parameters_valid(spec.c_rho, r0, b):
        raise ValueError(
            f"(r0={r0}, b={b}) violate C^3 r0/(1-C r0) + C^2 b <= 1/2 "
            f"for C={spec.c_rho}"
        )
    points = spec.points
    masses = spec.masses
    npts = len(points)

    # root cell holds everything; representative is the lowest-index point
    parents = [-1]
    net_index = [0]
    level_start = [0, 1]
    assignment = np.zeros(npts, dtype=np.int64)  # current cell per cloud point
    level_assignments: list[np.ndarray] = []

    for m in range(1, max_level + 1):
        eps = r0**m
        net = _greedy_net(points, eps)
        if len(net) == 0:
            raise ValueError(f"empty net at level {m}")
        start = len(parents)
        if m == 1:
            parent_of_net = np.zeros(len(net), dtype=np.int64)
        else:
            # nearest previous-level net point; argmin takes the lowest
            # index on ties, matching the greedy scan order
            prev_ids = np.arange(level_start[m - 1], level_start[m])
            prev_pts = points[[net_index[v] for v in prev_ids]]
            d2 = ((points[net][:, None, :] - prev_pts[None, :, :]) ** 2).sum(axis=2)
            parent_of_net = prev_ids[np.argmin(d2, axis=1)]
        kids_of: dict[int, list[int]] = {}
        for j, idx in enumerate(net):
            parents.append(int(parent_of_net[j]))
            net_index.append(int(idx))
            kids_of.setdefault(int(parent_of_net[j]), []).append(start + j)
        missing = [
            pid for pid in range(level_start[m - 1], level_start[m])
            if pid not in kids_of
        ]
        if missing:
            raise ValueError(
                f"net level {m} leaves {len(missing)} cells childless; "
                "decrease r0 or refine the cloud"
            )
        # reassign every cloud point to the nearest child of its cell
        new_assignment = np.empty(npts, dtype=np.int64)
        for pid, kid_ids_list in kids_of.items():
            members = np.nonzero(assignment == pid)[0]
            if len(members) == 0:
                continue
            kid_ids = np.asarray(kid_ids_list, dtype=np.int64)
            kid_pts = points[[net_index[k] for k in kid_ids_list]]
            d2 = ((points[members][:, None, :] - kid_pts[None, :, :]) ** 2).sum(axis=2)
            new_assignment[members] = kid_ids[np.argmin(d2, axis=1)]
        assignment = new_assignment
        level_start.append(len(parents))
        level_assignments.append(assignment.copy())

    n = len(parents)
    parent_arr = np.asarray(parents, dtype=np.int64)
    level_start_arr = np.asarray(level_start, dtype=np.int64)
    level_of = np.zeros(n, dtype=np.int64)
    for m in range(max_level + 1):
        level_of[level_start_arr[m]:level_start_arr[m + 1]] = m

    measure = np.zeros(n)
    measure[ROOT] = masses.sum()
    samples: list = [points]
    for m in range(1, max_level + 1):
        assign = level_assignments[m - 1]
        for v in range(level_start_arr[m], level_start_arr[m + 1]):
            members = np.nonzero(assign == v)[0]
            cell_mass = masses[members].sum()
            if cell_mass <= 0.0:
                raise ValueError(
                    f"cell {v} at level {m} has zero mass; "
                    "positive masses are required for walk conductances"
                )
            measure[v] = cell_mass
            samples.append(points[members])

    rep = points[np.asarray(net_index, dtype=np.int64)]
    tree = IndexTree(
        kind="pointcloud",
        r0=r0,
        max_level=max_level,
        dim=points.shape[1],
        level_start=level_start_arr,
        level_of=level_of,
        parent=parent_arr,
        measure=measure,
        log_measure=np.log(measure),
        rep=rep,
        words=net_index,
        samples=samples,
        children=_children_from_parent(parent_arr),
        spec=spec,
    )
    tree.meta["b"] = b
    return tree


def build_tree(spec: ModelSpec, max_level: int, **kwargs) -> IndexTree:
    """Dispatch on the model kind; point clouds take r0/b via kwargs."""
    if spec.kind == "ifs":
        return build_ifs_tree(spec, max_level, **kwargs)
    r0 = kwargs.pop("r0", 0.125)
    b = kwargs.pop("b", 0.05)
    return build_net_tree(spec, r0=r0, b=b, max_level=max_level)


# -- verification --------------------------------------------------------------


@dataclass
class PartitionReport:
    child_sum_defect: float
    max_radius_ratio: float
    min_separation_ratio: float
    flags: list[str]

    @property
    def ok(self) -> bool:
        return not self.flags


def verify_partition(tree: IndexTree, tol: float = 1e-9) -> PartitionReport:
    """Diagnostic scan of the partition-tree structure.

    Checks that sibling measures add up to parent measures, that every
    non-root vertex has a parent one level up, and reports the geometric
    cell radius (relative to r0^level) seen in the sample sets.
    """
    flags: list[str] = []
    defect = 0.0
    for v in range(tree.num_vertices):
        kids = tree.children[v]
        if tree.level_of[v] < tree.max_level:
            if len(kids) == 0:
                flags.append(f"vertex {v} below max_level has no children")
                continue
            gap = abs(tree.measure[kids].sum() - tree.measure[v])
            defect = max(defect, gap)
    if defect > tol:
        flags.append(f"child measures do not sum to parents (defect {defect:.3e})")
    for v in range(1, tree.num_vertices):
        p = tree.parent[v]
        if p < 0 or tree.level_of[p] != tree.level_of[v] - 1:
            flags.append(f"vertex {v} has inconsistent parent link")
    if abs(tree.measure[ROOT] - 1.0) > tol:
        flags.append("root measure differs from 1")
    if np.any(tree.measure <= 0):
        flags.append("nonpositive cell measure")

    max_radius_ratio = 0.0
    for v in range(1, tree.num_vertices):
        scale = tree.r0 ** int(tree.level_of[v])
        d = tree.samples[v] - tree.rep[v][None, :]
        radius = math.sqrt(float((d**2).sum(axis=1).max()))
        max_radius_ratio = max(max_radius_ratio, radius / scale)

    # nearest distinct same-level representative, as an inner-ball proxy
    min_sep = math.inf
    for m in range(1, tree.max_level + 1):
        ids = tree.level_ids(m)
        if len(ids) < 2:
            continue
        reps = tree.rep[ids]
        kdt = cKDTree(reps)
        dist, _ = kdt.query(reps, k=2)
        min_sep = min(min_sep, float(dist[:, 1].min()) / tree.r0**m)
    if min_sep <= 0.0:
        flags.append("coincident representative points within a level")

    return PartitionReport(
        child_sum_defect=float(defect),
        max_radius_ratio=float(max_radius_ratio),
        min_separation_ratio=float(min_sep if min_sep < math.inf else 0.0),
        flags=flags,
    )
