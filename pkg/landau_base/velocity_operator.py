"""
Sparse velocity-space operator L u = tr(A D_v^2 u) + B . grad_v u + C u on one spatial node.

19-point stencil: second differences on the axes, first-order upwinding of B,
and zero Dirichlet data outside the velocity cube. Cross derivatives use the
positive-coefficient seven-point formula picked by the sign of A_ab, and an
axis whose diagonal entry cannot pay for its cross terms gets the deficit as
extra diffusion, so every off-diagonal entry of L is nonnegative and
I - theta dt L is an M-matrix whenever C <= 0. The centered four-point cross
formula is kept as `cross_stencil="centered"`; it is second-order on smooth
anisotropic coefficients but does not preserve sign.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .errors import SolverError

logger = logging.getLogger(__name__)

SOLVERS = ("bicgstab", "direct")
CROSS_STENCILS = ("monotone", "centered")


def _shifted_pairs(n: int, offset: Tuple[int, int, int]):
    """Flat (row, column) indices for every node whose neighbour at `offset` lies in the cube."""
    ranges = []
    for d in offset:
        lo = max(0, -d)
        hi = min(n, n - d)
        ranges.append(np.arange(lo, hi))
    i, j, k = np.meshgrid(*ranges, indexing="ij")
    rows = (i * n + j) * n + k
    cols = ((i + offset[0]) * n + (j + offset[1])) * n + (k + offset[2])
    return (i, j, k), rows.ravel(), cols.ravel()


def _unit(axis: int, sign: int) -> Tuple[int, int, int]:
    e = [0, 0, 0]
    e[axis] = sign
    return tuple(e)


def diffusion_deficit(A: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """max(0, sum_{b != a} |A_ab| - A_aa - eps) per axis, shape A.shape[:-1]."""
    off = np.sum(np.abs(A), axis=-1) - np.abs(np.diagonal(A, axis1=-2, axis2=-1))
    return np.maximum(off - np.diagonal(A, axis1=-2, axis2=-1) - eps, 0.0)


def velocity_matrix(A: np.ndarray, B: np.ndarray, C: np.ndarray, h: float, eps: float = 0.0,
                    cross_stencil: str = "monotone") -> sparse.csr_matrix:
    """Assemble L for velocity-shaped A (n,n,n,3,3), B (n,n,n,3), C (n,n,n)."""
    if cross_stencil not in CROSS_STENCILS:
        raise ValueError(f"cross_stencil must be one of {CROSS_STENCILS}, got {cross_stencil!r}")
    n = C.shape[0]
    size = n ** 3
    h2 = h * h
    rows, cols, data = [], [], []

    def add(offset, coefficient):
        (i, j, k), r, c = _shifted_pairs(n, offset)
        rows.append(r)
        cols.append(c)
        data.append(coefficient[i, j, k].ravel())

    monotone = cross_stencil == "monotone"
    deficit = diffusion_deficit(A, eps) if monotone else np.zeros(C.shape + (3,))
    center = np.array(C, dtype=np.float64, copy=True)
    for a in range(3):
        diffusion = A[..., a, a] + eps + deficit[..., a]
        if monotone:
            # the seven-point cross formula borrows from both axis neighbours
            for b in range(3):
                if b != a:
                    diffusion = diffusion - np.abs(A[..., a, b])
        upwind_plus = np.maximum(B[..., a], 0.0) / h
        upwind_minus = np.maximum(-B[..., a], 0.0) / h
        add(_unit(a, 1), diffusion / h2 + upwind_plus)
        add(_unit(a, -1), diffusion / h2 + upwind_minus)
        center -= 2.0 * diffusion / h2 + upwind_plus + upwind_minus
    for a in range(3):
        for b in range(a + 1, 3):
            if monotone:
                positive = np.maximum(A[..., a, b], 0.0) / h2
                negative = np.maximum(-A[..., a, b], 0.0) / h2
                weights = {1: positive, -1: negative}
            else:
                cross = 2.0 * A[..., a, b] / (4.0 * h2)
            for sa in (1, -1):
                for sb in (1, -1):
                    offset = [0, 0, 0]
                    offset[a] = sa
                    offset[b] = sb
                    if monotone:
                        add(tuple(offset), weights[sa * sb])
                        center -= weights[sa * sb]
                    else:
                        add(tuple(offset), sa * sb * cross)
    rows.append(np.arange(size))
    cols.append(np.arange(size))
    data.append(center.ravel())
    matrix = sparse.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(size, size))
    return matrix.tocsr()


def explicit_rate(A: np.ndarray, B: np.ndarray, h: float, eps: float = 0.0) -> float:
    """Largest diagonal magnitude of the transport-free part of L, used for the CFL bound."""
    diffusion = np.trace(A, axis1=-2, axis2=-1) + 3.0 * eps
    if A.size:
        diffusion = diffusion + np.sum(diffusion_deficit(A, eps), axis=-1)
    drift = np.sum(np.abs(B), axis=-1)
    return float(np.max(2.0 * diffusion / h ** 2 + drift / h)) if A.size else 0.0


@dataclass(frozen=True)
class VelocitySolve:
    values: np.ndarray
    iterations: int


def theta_step(u: np.ndarray, L: sparse.csr_matrix, dt: float, theta: float, solver: str = "bicgstab",
               tol: float = 1e-10, max_iter: int = 500, source: Optional[np.ndarray] = None) -> VelocitySolve:
    """(I - theta dt L) u_new = (I + (1 - theta) dt L) u + dt source."""
    shape = u.shape
    flat = u.ravel()
    rhs = flat + (1.0 - theta) * dt * (L @ flat) if theta < 1.0 else flat.copy()
    if source is not None:
        rhs = rhs + dt * source.ravel()
    if theta == 0.0:
        return VelocitySolve(rhs.reshape(shape), 0)
    system = (sparse.identity(L.shape[0], format="csr") - theta * dt * L).tocsr()
    if solver == "direct":
        return VelocitySolve(sparse_linalg.spsolve(system.tocsc(), rhs).reshape(shape), 1)
    if solver != "bicgstab":
        raise ValueError(f"solver must be one of {SOLVERS}, got {solver!r}")
    if not np.any(rhs):
        return VelocitySolve(np.zeros(shape), 0)

    inverse_diagonal = 1.0 / system.diagonal()
    preconditioner = sparse_linalg.LinearOperator(system.shape, matvec=lambda x: inverse_diagonal * x)
    iterations = [0]

    def count(_):
        iterations[0] += 1

    solution, info = sparse_linalg.bicgstab(system, rhs, x0=flat.copy(), rtol=tol, atol=0.0,
                                            maxiter=max_iter, M=preconditioner, callback=count)
    if info != 0:
        residual = np.linalg.norm(system @ solution - rhs) / np.linalg.norm(rhs)
        raise SolverError(f"velocity solve did not reach tolerance {tol:g} in {max_iter} iterations "
                          f"(info={info}, relative residual {residual:.3e})")
    return VelocitySolve(solution.reshape(shape), iterations[0])
