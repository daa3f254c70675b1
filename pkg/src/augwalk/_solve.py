"""Shared Dirichlet solver for conductance networks.

All potential-theoretic quantities reduce to solving L u = b on the free
block of a weighted graph Laplacian with some vertices clamped.  The block
is symmetric positive definite whenever every free component touches a
clamped vertex, which the callers guarantee.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.sparse import csr_matrix, diags
from scipy.sparse.linalg import cg, spsolve

DIRECT_CUTOFF = 2000  # below this many unknowns we always eliminate directly


def graph_laplacian(cond: csr_matrix) -> csr_matrix:
    deg = np.asarray(cond.sum(axis=1)).ravel()
    return diags(deg) - cond


def dirichlet_solve(
    cond: csr_matrix,
    fixed_idx: np.ndarray,
    fixed_val: np.ndarray,
    rtol: float = 1e-12,
) -> np.ndarray:
    """Solve the clamped-harmonic problem and return the full value vector.

    Small systems are eliminated directly; larger ones first try a
    Jacobi-preconditioned conjugate gradient and fall back to the direct
    solver when the residual target is missed.
    """
    n = cond.shape[0]
    fixed_idx = np.asarray(fixed_idx, dtype=np.int64)
    fixed_val = np.asarray(fixed_val, dtype=float)
    free = np.ones(n, dtype=bool)
    free[fixed_idx] = False
    u = np.zeros(n)
    u[fixed_idx] = fixed_val
    nfree = int(free.sum())
    if nfree == 0:
        return u

    lap = graph_laplacian(cond)
    lff = lap[free][:, free].tocsr()
    b = np.asarray(cond[free][:, fixed_idx] @ fixed_val).ravel()

    if nfree < DIRECT_CUTOFF:
        x = spsolve(lff.tocsc(), b)
    else:
        dinv = 1.0 / lff.diagonal()
        precond = diags(dinv)
        x, info = cg(lff, b, rtol=rtol, atol=0.0, M=precond, maxiter=1000)
        bnorm = np.linalg.norm(b)
        if info != 0 or np.linalg.norm(lff @ x - b) > 10 * rtol * max(bnorm, 1e-300):
            x = spsolve(lff.tocsc(), b)
    resid = np.linalg.norm(lff @ x - b)
    if resid > 1e-8 * max(np.linalg.norm(b), 1e-300):
        warnings.warn(f"dirichlet solve residual {resid:.2e} above target")
    u[free] = x
    return u


def quadratic_energy(edges: np.ndarray, cond: np.ndarray, u: np.ndarray) -> float:
    """Sum of c * (u_x - u_y)^2 over the undirected edge list."""
    diff = u[edges[:, 0]] - u[edges[:, 1]]
    return float(np.sum(cond * diff * diff))
