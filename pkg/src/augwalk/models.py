"""Model specifications: iterated function systems and weighted point clouds.

A model defines a compact metric measure space (K, rho, mu) with diameter
normalized to 1.  Two kinds are supported:

* ``ifs``: a finite family of contractive similitudes on R^d together with
  positive probability weights.  K is the attractor, mu the self-similar
  measure.  The open set condition is asserted by the caller, not verified.
* ``pointcloud``: a finite set of points with nonnegative masses summing
  to 1 and a quasi-metric constant.

Specs load from / save to JSON and a small registry provides the built-in
models used throughout the test suite (``builtin:interval``,
``builtin:rotated-interval:p=P``, ``builtin:gasket``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Similitude",
    "ModelSpec",
    "load_model",
    "resolve_model",
    "builtin_model",
    "BUILTIN_NAMES",
]


@dataclass(frozen=True)
class Similitude:
    """Affine contraction x -> ratio * matrix @ x + offset with orthogonal matrix."""

    ratio: float
    matrix: np.ndarray  # (d, d) orthogonal part
    offset: np.ndarray  # (d,)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        o = np.asarray(self.offset, dtype=float)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", o)
        if not (0.0 < self.ratio < 1.0):
            raise ValueError(f"contraction ratio must lie in (0,1), got {self.ratio}")
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != o.shape[0]:
            raise ValueError("matrix/offset dimensions are inconsistent")
        if not np.allclose(m @ m.T, np.eye(m.shape[0]), atol=1e-10):
            raise ValueError("matrix part of a similitude must be orthogonal")

    @property
    def dim(self) -> int:
        return self.offset.shape[0]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.ratio * pts @ self.matrix.T + self.offset

    def fixed_point(self) -> np.ndarray:
        """Solve z = ratio * M z + offset; unique since ratio < 1."""
        d = self.dim
        return np.linalg.solve(np.eye(d) - self.ratio * self.matrix, self.offset)


@dataclass
class ModelSpec:
    """Description of the underlying space; see module docstring.

    ``gamma`` is the horizontal-edge threshold used when augmenting index
    trees; when None it defaults to 0.5 * r0 at build time.  ``base_point``
    (ifs only) seeds the cell representative points; defaults to the fixed
    point of S_1 o S_2, which avoids representative collisions on the
    built-in models.  ``boundary_points`` optionally lists the p.c.f.
    boundary used by the critical-exponent search.
    """

    kind: str  # "ifs" | "pointcloud"
    maps: list[Similitude] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    points: np.ndarray | None = None
    masses: np.ndarray | None = None
    c_rho: float = 1.0
    gamma: float | None = None
    base_point: np.ndarray | None = None
    boundary_points: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind == "ifs":
            if len(self.maps) < 2:
                raise ValueError("an IFS model needs at least two maps")
            if len(self.weights) != len(self.maps):
                raise ValueError("need one probability weight per map")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be positive and sum to 1")
            dims = {s.dim for s in self.maps}
            if len(dims) != 1:
                raise ValueError("all maps must act on the same space")
            if self.base_point is None:
                composite_fix = _composite_fixed_point(self.maps[0], self.maps[1])
                self.base_point = composite_fix
            else:
                self.base_point = np.asarray(self.base_point, dtype=float)
        elif self.kind == "pointcloud":
            if self.points is None or len(self.points) == 0:
                raise ValueError("point cloud must be nonempty")
            self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
            if self.masses is None:
                n = len(self.points)
                self.masses = np.full(n, 1.0 / n)
            self.masses = np.asarray(self.masses, dtype=float)
            if len(self.masses) != len(self.points):
                raise ValueError("need one mass per point")
            if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > 1e-9:
                raise ValueError("masses must be nonnegative and sum to 1")
            if self.c_rho < 1.0:
                raise ValueError("quasi-metric constant must be >= 1")
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.boundary_points is not None:
            self.boundary_points = np.atleast_2d(
                np.asarray(self.boundary_points, dtype=float)
            )

    @property
    def dim(self) -> int:
        if self.kind == "ifs":
            return self.maps[0].dim
        return self.points.shape[1]

    @property
    def r0(self) -> float:
        """Minimal contraction ratio (ifs only)."""
        if self.kind != "ifs":
            raise ValueError("r0 is only defined for IFS models")
        return min(s.ratio for s in self.maps)

    def fixed_points(self) -> np.ndarray:
        """Fixed points of the individual maps (ifs only)."""
        if self.kind != "ifs":
            raise ValueError("fixed points are only defined for IFS models")
        return np.array([s.fixed_point() for s in self.maps])

    def upper_dimension(self) -> float:
        """max_i log p_i / log r0 for a uniform-ratio IFS.

        This is the smallest exponent a with mu(B(xi, r)) >= c r^a uniformly;
        for non-uniform ratios the closed form does not apply and we refuse.
        """
        if self.kind != "ifs":
            raise ValueError("upper dimension needs an IFS model")
        ratios = {s.ratio for s in self.maps}
        if max(ratios) - min(ratios) > 1e-12:
            raise ValueError("upper dimension is only supported for uniform ratios")
        r0 = self.r0
        return max(math.log(p) / math.log(r0) for p in self.weights)

    # -- JSON round trip ----------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.name:
            d["name"] = self.name
        if self.gamma is not None:
            d["gamma"] = self.gamma
        if self.kind == "ifs":
            d["maps"] = [
                {
                    "ratio": s.ratio,
                    "matrix": s.matrix.tolist(),
                    "offset": s.offset.tolist(),
                }
                for s in self.maps
            ]
            d["weights"] = list(map(float, self.weights))
            d["base_point"] = self.base_point.tolist()
            if self.boundary_points is not None:
                d["boundary_points"] = self.boundary_points.tolist()
        else:
            d["points"] = self.points.tolist()
            d["masses"] = self.masses.tolist()
            d["c_rho"] = self.c_rho
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        kind = d.get("kind")
        if kind == "ifs":
            maps = []
            for m in d["maps"]:
                ratio = float(m["ratio"])
                offset = np.asarray(m["offset"], dtype=float)
                dim = offset.shape[0]
                matrix = np.asarray(m.get("matrix", np.eye(dim)), dtype=float)
                maps.append(Similitude(ratio, matrix, offset))
            return cls(
                kind="ifs",
                maps=maps,
                weights=[float(w) for w in d["weights"]],
                gamma=d.get("gamma"),
                base_point=d.get("base_point"),
                boundary_points=d.get("boundary_points"),
                name=d.get("name", ""),
            )
        if kind == "pointcloud":
            return cls(
                kind="pointcloud",
                points=np.asarray(d["points"], dtype=float),
                masses=np.asarray(d["masses"], dtype=float) if "masses" in d else None,
                c_rho=float(d.get("c_rho", 1.0)),
                gamma=d.get("gamma"),
                name=d.get("name", ""),
            )
        raise ValueError(f"unknown model kind {kind!r}")

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def load_model(path) -> ModelSpec:
    with open(path) as fh:
        return ModelSpec.from_dict(json.load(fh))


def _composite_fixed_point(s1: Similitude, s2: Similitude) -> np.ndarray:
    """Fixed point of s1 o s2, an interior-ish point of the attractor."""
    d = s1.dim
    a = s1.ratio * s2.ratio * (s1.matrix @ s2.matrix)
    b = s1.ratio * (s1.matrix @ s2.offset) + s1.offset
    return np.linalg.solve(np.eye(d) - a, b)


# -- built-in models ---------------------------------------------------------

BUILTIN_NAMES = ("interval", "rotated-interval", "gasket")


def _interval_model() -> ModelSpec:
    half = np.array([[1.0]])
    maps = [
        Similitude(0.5, half, np.array([0.0])),
        Similitude(0.5, half, np.array([0.5])),
    ]
    return ModelSpec(
        kind="ifs",
        maps=maps,
        weights=[0.5, 0.5],
        base_point=np.array([0.5]),
        boundary_points=np.array([[0.0], [1.0]]),
        name="interval",
    )


def _rotated_interval_model(p: float) -> ModelSpec:
    if not 0.0 < p < 1.0:
        raise ValueError("weight p must lie in (0,1)")
    maps = [
        Similitude(0.5, np.array([[1.0]]), np.array([0.0])),
        Similitude(0.5, np.array([[-1.0]]), np.array([1.0])),  # x -> 1 - x/2
    ]
    return ModelSpec(
        kind="ifs",
        maps=maps,
        weights=[p, 1.0 - p],
        base_point=np.array([0.5]),
        boundary_points=np.array([[0.0], [1.0]]),
        name=f"rotated-interval:p={p:g}",
    )


def _gasket_model() -> ModelSpec:
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
    eye = np.eye(2)
    maps = [Similitude(0.5, eye, 0.5 * c) for c in corners]
    return ModelSpec(
        kind="ifs",
        maps=maps,
        weights=[1.0 / 3.0] * 3,
        boundary_points=corners,
        name="gasket",
    )


def builtin_model(name: str, **kwargs) -> ModelSpec:
    if name == "interval":
        return _interval_model()
    if name == "rotated-interval":
        return _rotated_interval_model(float(kwargs.get("p", 0.5)))
    if name == "gasket":
        return _gasket_model()
    raise ValueError(f"unknown builtin model {name!r}; known: {BUILTIN_NAMES}")


def resolve_model(ref: str) -> ModelSpec:
    """Resolve ``builtin:NAME[:k=v,...]`` or a JSON file path to a ModelSpec."""
    if ref.startswith("builtin:"):
        rest = ref[len("builtin:"):]
        parts = rest.split(":")
        name = parts[0]
        kwargs = {}
        for extra in parts[1:]:
            for item in extra.split(","):
                if not item:
                    continue
                k, _, v = item.partition("=")
                kwargs[k] = v
        return builtin_model(name, **kwargs)
    return load_model(ref)
