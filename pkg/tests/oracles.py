"""Independent dense oracles used by the tests.

Nothing here touches the FFT projector: constraints are assembled from an
explicit DFT matrix and solved with dense linear algebra or scipy's CG.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import null_space
from scipy.sparse.linalg import LinearOperator, cg


def dft_matrix(n: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows F[xi, x] = exp(-2 pi i xi.x / n) / n^d over the full grid, plus the frequency list."""
    ax = np.fft.fftfreq(n, 1.0 / n)
    freqs = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    idx = np.stack(np.meshgrid(*([np.arange(n)] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    phase = np.exp(-2j * np.pi * (freqs @ idx.T) / n) / n ** dim
    return phase, freqs


def afree_constraints(op, n: int, zero_mean: bool = True) -> np.ndarray:
    """Real constraint matrix C with C u = 0 iff u is discretely A-free (and zero mean).

    Unknowns are ordered grid point major, component minor (C-order of an
    (n,)*d + (N,) array).
    """
    dim, N = op.dim, op.in_dim
    F, freqs = dft_matrix(n, dim)
    rows = []
    for q in range(len(freqs)):
        sym = op.symbol(freqs[q])  # (M, N)
        if not np.any(sym):
            continue
        block = np.einsum("mc,x->mxc", sym, F[q]).reshape(sym.shape[0], -1)
        rows.append(block.real)
        rows.append(block.imag)
    if zero_mean:
        mean = np.zeros((N, n ** dim * N))
        for c in range(N):
            mean[c, c::N] = 1.0 / n ** dim
        rows.append(mean)
    return np.concatenate(rows, axis=0)


def feasible_basis(op, n: int, zero_mean: bool = True, support: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal basis of the discrete A-free subspace, optionally with v = 0 off ``support``."""
    C = afree_constraints(op, n, zero_mean)
    N = op.in_dim
    if support is not None:
        off = np.flatnonzero(~np.repeat(support.reshape(-1), N))
        E = np.zeros((off.size, C.shape[1]))
        E[np.arange(off.size), off] = 1.0
        C = np.concatenate([C, E])
    return null_space(C, rcond=1e-10)


def weighted_lsq_cg(Z: np.ndarray, weight: np.ndarray, target: np.ndarray, n_comp: int,
                    rtol: float = 1e-13) -> tuple[float, np.ndarray]:
    """min over c of the grid mean of sum_c weight * (Zc - target)^2, by CG on the normal equations.

    ``weight`` and ``target`` are given per unknown; returns (value, Zc).
    """
    w = weight.reshape(-1)
    t = target.reshape(-1)
    npts = w.size / n_comp

    def matvec(c):
        return Z.T @ (w * (Z @ c))

    op = LinearOperator((Z.shape[1], Z.shape[1]), matvec=matvec, dtype=float)
    rhs = Z.T @ (w * t)
    c, _ = cg(op, rhs, rtol=rtol, atol=0.0, maxiter=50 * Z.shape[1])
    r = Z @ c - t
    return float(np.sum(w * r * r) / npts), Z @ c


def lower_convex_hull(x: np.ndarray, y: np.ndarray):
    """Lower convex hull (monotone chain) of points sorted by x; returns a callable."""
    hull = []
    for p in zip(x, y):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    hx, hy = np.array(hull).T
    return lambda q: np.interp(q, hx, hy)
