"""Constant-coefficient homogeneous differential operators and their symbols.

An operator of order k from R^N to R^M acting on fields over R^d is stored as
a map from multi-indices ``i`` (``|i| = k``) to ``M x N`` coefficient
matrices.  Its symbol is the matrix polynomial

    A[w] = sum_i w^i A^(i),     w^i = prod_j w_j^(i_j).

Everything here is exact dense linear algebra on small matrices; the
FFT-level machinery lives in :mod:`afree_homog.projection`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

DEFAULT_TOL = 1e-10


def multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    """All multi-indices of length ``dim`` and degree ``order``, graded-lex."""
    out = [i for i in itertools.product(range(order + 1), repeat=dim) if sum(i) == order]
    return sorted(out, reverse=True)


@dataclass(frozen=True, eq=False)
class DifferentialOperator:
    dim: int
    order: int
    in_dim: int
    out_dim: int
    coeffs: Mapping[tuple[int, ...], np.ndarray]
    declared_rank: int | None = None
    name: str | None = None
    _keys: tuple = field(init=False, repr=False)
    _stack: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for attr in ("dim", "order", "in_dim", "out_dim"):
            if int(getattr(self, attr)) < 1:
                raise ValueError(f"{attr} must be a positive integer")
        cleaned = {}
        for key, mat in self.coeffs.items():
            key = tuple(int(v) for v in key)
            if len(key) != self.dim or min(key) < 0 or sum(key) != self.order:
                raise ValueError(f"multi-index {key} is not of length {self.dim} and degree {self.order}")
            mat = np.array(mat, dtype=float).reshape(self.out_dim, self.in_dim)
            if key in cleaned:
                cleaned[key] = cleaned[key] + mat
            else:
                cleaned[key] = mat
        if not cleaned or not any(np.any(m != 0) for m in cleaned.values()):
            raise ValueError("operator needs at least one nonzero coefficient matrix")
        keys = tuple(k for k in multi_indices(self.dim, self.order) if k in cleaned)
        for m in cleaned.values():
            m.setflags(write=False)
        object.__setattr__(self, "coeffs", {k: cleaned[k] for k in keys})
        object.__setattr__(self, "_keys", keys)
        object.__setattr__(self, "_stack", np.stack([cleaned[k] for k in keys]))
        if self.declared_rank is not None and not 0 <= self.declared_rank <= min(self.in_dim, self.out_dim):
            raise ValueError("declared_rank out of range")

    def __repr__(self):
        label = self.name or "DifferentialOperator"
        return f"<{label}: d={self.dim} k={self.order} R^{self.in_dim} -> R^{self.out_dim}>"

    def symbol(self, omega) -> np.ndarray:
        """Vectorised symbol: ``omega`` of shape (..., d) -> (..., M, N)."""
        omega = np.asarray(omega, dtype=float)
        if omega.shape[-1:] != (self.dim,):
            raise ValueError(f"frequency must have trailing dimension {self.dim}, got shape {omega.shape}")
        powers = np.array(self._keys)  # (K, d)
        monomials = np.prod(omega[..., None, :] ** powers, axis=-1)  # (..., K)
        return np.einsum("...k,kmn->...mn", monomials, self._stack)

    def adjoint_stack(self) -> np.ndarray:
        return np.transpose(self._stack, (0, 2, 1))

    @property
    def multi_index_array(self) -> np.ndarray:
        return np.array(self._keys, dtype=int)

    @cached_property
    def unit_symbol_norm(self) -> float:
        """Largest singular value of the symbol over sampled unit frequencies."""
        pts = np.concatenate([canonical_directions(self.dim), sphere_samples(self.dim, 64, 0)])
        return float(np.linalg.norm(self.symbol(pts), ord=2, axis=(-2, -1)).max())


@dataclass(frozen=True)
class SymbolMatrix:
    frequency: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True)
class RankCertificate:
    status: str  # "constant_rank" or "violation"
    rank: int | None
    samples_used: int
    tolerance: float
    witnesses: tuple = ()  # ((w1, r1), (w2, r2)) on violation

    @property
    def ok(self) -> bool:
        return self.status == "constant_rank"

    def to_dict(self) -> dict:
        out = {"status": self.status, "samples": self.samples_used, "tol": self.tolerance}
        if self.ok:
            out["r"] = self.rank
        else:
            (w1, r1), (w2, r2) = self.witnesses
            out["witnesses"] = [{"omega": list(map(float, w1)), "rank": r1},
                                {"omega": list(map(float, w2)), "rank": r2}]
        return out


@dataclass(frozen=True)
class PairCheck:
    compatible: bool
    witness: np.ndarray | None = None
    detail: str = ""


def eval_symbol(op: DifferentialOperator, omega) -> SymbolMatrix:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (op.dim,):
        raise ValueError(f"frequency of dimension {omega.shape} does not match operator dimension {op.dim}")
    return SymbolMatrix(omega.copy(), op.symbol(omega))


def _unit(omega, dim) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (dim,):
        raise ValueError(f"frequency of dimension {omega.shape} does not match operator dimension {dim}")
    nrm = np.linalg.norm(omega)
    if nrm == 0:
        raise ValueError("frequency must be nonzero")
    return omega / nrm


def matrix_rank(mat: np.ndarray, tol: float = DEFAULT_TOL) -> int:
    s = np.linalg.svd(np.atleast_2d(mat), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def rank_at(op: DifferentialOperator, omega, tol: float = DEFAULT_TOL) -> int:
    return matrix_rank(op.symbol(_unit(omega, op.dim)), tol)


def sphere_samples(dim: int, num: int, seed: int = 0) -> np.ndarray:
    """Scrambled Sobol points pushed to the unit sphere through the normal map."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    m = max(1, int(np.ceil(np.log2(max(num, 2)))))
    sob = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)[:num]
    g = ndtri(np.clip(sob, 1e-12, 1 - 1e-12))
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    g = g[nrm[:, 0] > 1e-8]
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def canonical_directions(dim: int) -> np.ndarray:
    """Axes (both signs) followed by all +-1 diagonals, normalised."""
    eye = np.eye(dim)
    axes = np.concatenate([eye, -eye])
    if dim == 1:
        return axes
    diags = np.array(list(itertools.product((1.0, -1.0), repeat=dim)))
    return np.concatenate([axes, diags / np.sqrt(dim)])


def _frequency_set(dim: int, num_samples: int, seed: int) -> np.ndarray:
    if num_samples < 2 * (dim + 1):
        raise ValueError(f"need at least {2 * (dim + 1)} samples, got {num_samples}")
    return np.concatenate([canonical_directions(dim), sphere_samples(dim, num_samples, seed)])


def _batch_ranks(mats: np.ndarray, tol: float) -> np.ndarray:
    s = np.linalg.svd(mats, compute_uv=False)
    top = s[..., :1]
    return np.where(top[..., 0] > 0, np.sum(s > tol * top, axis=-1), 0)


def verify_constant_rank(op: DifferentialOperator, num_samples: int = 256, tol: float = DEFAULT_TOL,
                         seed: int = 0) -> RankCertificate:
    """Sample the unit sphere and compare symbol ranks.

    This is a certificate of confidence, not a proof: a rank drop confined
    to a set missed by every sample goes unnoticed.
    """
    freqs = _frequency_set(op.dim, num_samples, seed)
    ranks = _batch_ranks(op.symbol(freqs), tol)
    first = int(ranks[0])
    bad = np.flatnonzero(ranks != first)
    if bad.size:
        j = int(bad[0])
        return RankCertificate("violation", None, len(freqs), tol,
                               ((freqs[0], first), (freqs[j], int(ranks[j]))))
    return RankCertificate("constant_rank", first, len(freqs), tol)


def pseudoinverse(mat, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose inverse through the SVD; works on stacks (..., M, N)."""
    mat = np.asarray(mat, dtype=float)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    top = s[..., :1] if s.shape[-1] else s
    keep = (s > tol * top) & (top > 0)
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return np.einsum("...ji,...j,...kj->...ik", vh, inv_s, u)


def kernel_projector(mats: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal projector onto ker of each matrix in a stack (..., M, N).

    Built from the null right-singular vectors, so a trivial kernel gives an
    exact zero matrix.
    """
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[-1]
    _, s, vh = np.linalg.svd(mats, full_matrices=True)
    top = s[..., :1]
    null = (s <= tol * top) | (top <= 0)
    if s.shape[-1] < n:
        null = np.concatenate([null, np.ones(null.shape[:-1] + (n - s.shape[-1],), bool)], axis=-1)
    return np.einsum("...ji,...j,...jk->...ik", vh, null.astype(float), vh)


def kernel_projection(op: DifferentialOperator, omega, tol: float = DEFAULT_TOL) -> np.ndarray:
    """P_A[w] = I - A[w]^+ A[w], evaluated at w/|w|."""
    sym = op.symbol(_unit(omega, op.dim))
    return np.eye(op.in_dim) - pseudoinverse(sym, tol) @ sym


def check_potential_pair(op_a: DifferentialOperator, op_b: DifferentialOperator, num_samples: int = 128,
                         tol: float = 1e-9, seed: int = 0) -> PairCheck:
    """Sampled check that ker A[w] = im B[w] on the unit sphere."""
    if op_a.dim != op_b.dim or op_b.out_dim != op_a.in_dim:
        raise ValueError(
            f"cannot chain {op_b!r} into {op_a!r}: need matching dim and out_dim(B) == in_dim(A)")
    freqs = _frequency_set(op_a.dim, num_samples, seed)
    sa, sb = op_a.symbol(freqs), op_b.symbol(freqs)
    prod = np.linalg.norm(sa @ sb, ord=2, axis=(-2, -1))
    ra = _batch_ranks(sa, DEFAULT_TOL)
    rb = _batch_ranks(sb, DEFAULT_TOL)
    for j in range(len(freqs)):
        if prod[j] > tol:
            return PairCheck(False, freqs[j], f"|A B| = {prod[j]:.3e}")
        if rb[j] != op_a.in_dim - ra[j]:
            return PairCheck(False, freqs[j], f"rank B = {rb[j]}, N - rank A = {op_a.in_dim - ra[j]}")
    return PairCheck(True)


def operator_from_pairs(dim: int, order: int, in_dim: int, out_dim: int,
                        pairs: Sequence[tuple[Sequence[int], np.ndarray]], **kw) -> DifferentialOperator:
    return DifferentialOperator(dim, order, in_dim, out_dim, {tuple(i): np.asarray(m) for i, m in pairs}, **kw)
