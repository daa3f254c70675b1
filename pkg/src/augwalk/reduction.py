"""Exact resistance of small networks by rational elimination.

Serves as the independent oracle for the floating-point resistance solver.
Conductances must be exact (int or Fraction).  Terminal sets are shorted
into supernodes, then interior vertices are eliminated one at a time:
degree-1 vertices are dropped, degree-2 eliminations are the series law,
degree-3 the star-triangle transform, and higher degrees the general
star-mesh step, which is Gaussian elimination on the Laplacian.  Parallel
edges merge by adding conductances throughout.
"""

from __future__ import annotations

import math
from fractions import Fraction

__all__ = ["reduce_resistance", "series", "parallel", "wye_to_delta"]


def series(r1: Fraction, r2: Fraction) -> Fraction:
    return r1 + r2


def parallel(r1: Fraction, r2: Fraction) -> Fraction:
    return (r1 * r2) / (r1 + r2)


def wye_to_delta(c1: Fraction, c2: Fraction, c3: Fraction):
    """Conductances of the triangle replacing a 3-star with leg conductances c_i.

    Returns (c23, c13, c12): the edge opposite leg i carries c_j c_k / (sum).
    """
    s = c1 + c2 + c3
    return (c2 * c3 / s, c1 * c3 / s, c1 * c2 / s)


def _star_mesh(adj: dict, v) -> None:
    """Eliminate v, wiring its neighbors pairwise: c_ab += c_va c_vb / total."""
    nbrs = adj.pop(v)
    total = sum(nbrs.values())
    items = list(nbrs.items())
    for a, _ in items:
        adj[a].pop(v)
    if total == 0:
        return
    for i in range(len(items)):
        a, ca = items[i]
        for j in range(i + 1, len(items)):
            b, cb = items[j]
            add = ca * cb / total
            adj[a][b] = adj[a].get(b, Fraction(0)) + add
            adj[b][a] = adj[a][b]


def reduce_resistance(edges, terminals_a, terminals_b) -> Fraction | float:
    """Exact effective resistance between two vertex sets.

    ``edges`` is an iterable of (u, v, conductance) with exact rational
    conductances; vertices are arbitrary hashables.  Overlapping terminal
    sets give 0 by convention; disconnected ones give math.inf.
    """
    terminals_a = set(terminals_a)
    terminals_b = set(terminals_b)
    if not terminals_a or not terminals_b:
        raise ValueError("terminal sets must be nonempty")
    if terminals_a & terminals_b:
        return Fraction(0)

    A, B = "__A__", "__B__"

    def node(u):
        if u in terminals_a:
            return A
        if u in terminals_b:
            return B
        return u

    adj: dict = {A: {}, B: {}}
    for u, v, c in edges:
        if isinstance(c, float):
            raise TypeError("the exact reducer needs int or Fraction conductances")
        c = Fraction(c)
        if c < 0:
            raise ValueError("negative conductance")
        a, b = node(u), node(v)
        if a == b or c == 0:
            continue
        adj.setdefault(a, {})
        adj.setdefault(b, {})
        adj[a][b] = adj[a].get(b, Fraction(0)) + c
        adj[b][a] = adj[a][b]

    # eliminate interior vertices, lowest degree first (series, then
    # star-triangle, then general star-mesh)
    while True:
        interior = [u for u in adj if u not in (A, B)]
        if not interior:
            break
        v = min(interior, key=lambda u: (len(adj[u]), str(u)))
        _star_mesh(adj, v)

    c_ab = adj[A].get(B, Fraction(0))
    if c_ab == 0:
        return math.inf
    return 1 / c_ab
