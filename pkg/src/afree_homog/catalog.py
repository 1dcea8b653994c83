"""Built-in operators and their potentials.

Name strings accepted by :func:`get`:

    grad[:d[:N]]        gradient of an R^N-valued field (default d=3, N=1)
    gradk:k[:d]         k-th gradient of a scalar (default d=3)
    curl[:d]            curl in d=3 or the scalar curl in d=2
    rowcurl:d           row-wise curl of d x d matrix fields (curl-free rows = gradients)
    div[:d]             divergence (default d=3)
    curlcurl            curl curl on R^3-valued fields (symbol w w^T - |w|^2 I)
    inc                 Saint-Venant incompatibility on symmetric 3x3 matrices
    symgrad[:d]         symmetric gradient, values in Sym(d)
    divantisym:d        row divergence of antisymmetric d x d matrices

Symmetric matrices are stored in Mandel coordinates (diagonal, then
sqrt(2) times the upper off-diagonal entries) so that the Euclidean norm of
the coordinate vector is the Frobenius norm.  Antisymmetric matrices are
stored by their upper-triangular entries w_ab, a < b.
"""
from __future__ import annotations

import itertools
from math import sqrt

import numpy as np

from .operators import DifferentialOperator, multi_indices

CATALOG_NAMES = ("grad", "gradk", "curl", "rowcurl", "div", "curlcurl", "inc", "symgrad", "divantisym")


def _unit(dim, i):
    e = [0] * dim
    e[i] = 1
    return tuple(e)


def sym_pairs(dim: int) -> list[tuple[int, int]]:
    return [(a, a) for a in range(dim)] + [(a, b) for a in range(dim) for b in range(a + 1, dim)]


def antisym_pairs(dim: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(dim) for b in range(a + 1, dim)]


def mandel(mat: np.ndarray) -> np.ndarray:
    """(..., d, d) symmetric -> (..., d(d+1)/2) Mandel vector."""
    d = mat.shape[-1]
    cols = [mat[..., a, b] * (1.0 if a == b else sqrt(2.0)) for a, b in sym_pairs(d)]
    return np.stack(cols, axis=-1)


def unmandel(vec: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros(vec.shape[:-1] + (dim, dim))
    for c, (a, b) in enumerate(sym_pairs(dim)):
        if a == b:
            out[..., a, a] = vec[..., c]
        else:
            out[..., a, b] = out[..., b, a] = vec[..., c] / sqrt(2.0)
    return out


def gradient(dim: int = 3, n_comp: int = 1) -> DifferentialOperator:
    coeffs = {}
    for i in range(dim):
        a = np.zeros((n_comp * dim, n_comp))
        for c in range(n_comp):
            a[c * dim + i, c] = 1.0
        coeffs[_unit(dim, i)] = a
    return DifferentialOperator(dim, 1, n_comp, n_comp * dim, coeffs, declared_rank=n_comp,
                                name=f"grad:{dim}:{n_comp}")


def grad_k(order: int, dim: int = 3) -> DifferentialOperator:
    """k-th gradient of a scalar, all d^k ordered partial derivatives."""
    tuples = list(itertools.product(range(dim), repeat=order))
    coeffs = {}
    for alpha in multi_indices(dim, order):
        a = np.zeros((len(tuples), 1))
        for row, t in enumerate(tuples):
            if tuple(np.bincount(t, minlength=dim)) == alpha:
                a[row, 0] = 1.0
        coeffs[alpha] = a
    return DifferentialOperator(dim, order, 1, dim ** order, coeffs, declared_rank=1,
                                name=f"gradk:{order}:{dim}")


def curl(dim: int = 3) -> DifferentialOperator:
    if dim == 3:
        a1 = [[0, 0, 0], [0, 0, -1], [0, 1, 0]]
        a2 = [[0, 0, 1], [0, 0, 0], [-1, 0, 0]]
        a3 = [[0, -1, 0], [1, 0, 0], [0, 0, 0]]
        return DifferentialOperator(3, 1, 3, 3, {(1, 0, 0): a1, (0, 1, 0): a2, (0, 0, 1): a3},
                                    declared_rank=2, name="curl")
    if dim == 2:
        return DifferentialOperator(2, 1, 2, 1, {(1, 0): [[0, 1]], (0, 1): [[-1, 0]]},
                                    declared_rank=1, name="curl:2")
    raise ValueError("curl is available for d = 2 or 3")


def rowcurl(dim: int = 2) -> DifferentialOperator:
    """Antisymmetrised gradient of each row of a d x d matrix field.

    Component (c, a, b) with a < b is d_a U_cb - d_b U_ca; the kernel of the
    symbol at w is {c (x) w}, i.e. the rank-one matrices with rows along w.
    """
    pairs = antisym_pairs(dim)
    if not pairs:
        raise ValueError("rowcurl needs d >= 2")
    rows = [(c, a, b) for c in range(dim) for a, b in pairs]
    coeffs = {}
    for i in range(dim):
        a_mat = np.zeros((len(rows), dim * dim))
        for r, (c, a, b) in enumerate(rows):
            if i == a:
                a_mat[r, c * dim + b] += 1.0
            if i == b:
                a_mat[r, c * dim + a] -= 1.0
        coeffs[_unit(dim, i)] = a_mat
    return DifferentialOperator(dim, 1, dim * dim, len(rows), coeffs,
                                declared_rank=dim * dim - dim, name=f"rowcurl:{dim}")


def divergence(dim: int = 3) -> DifferentialOperator:
    coeffs = {_unit(dim, i): np.eye(dim)[i][None, :] for i in range(dim)}
    return DifferentialOperator(dim, 1, dim, 1, coeffs, declared_rank=1, name=f"div:{dim}")


def curl_curl() -> DifferentialOperator:
    """curl curl u = grad div u - Laplacian u on R^3-valued fields."""
    coeffs = {}
    for i in range(3):
        a = np.zeros((3, 3))
        a[(i + 1) % 3, (i + 1) % 3] = -1.0
        a[(i + 2) % 3, (i + 2) % 3] = -1.0
        coeffs[tuple(2 if j == i else 0 for j in range(3))] = a
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        a = np.zeros((3, 3))
        a[i, j] = a[j, i] = 1.0
        coeffs[tuple(1 if m in (i, j) else 0 for m in range(3))] = a
    return DifferentialOperator(3, 2, 3, 3, coeffs, declared_rank=2, name="curlcurl")


def _levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in itertools.permutations(range(3)):
        eps[i, j, k] = np.linalg.det(np.eye(3)[[i, j, k]])
    return eps


def incompatibility() -> DifferentialOperator:
    """inc(E)_ij = eps_ikl eps_jmn d_k d_m E_ln on Sym(3), Mandel in and out."""
    eps = _levi_civita()
    basis = [unmandel(np.eye(6)[c], 3) for c in range(6)]
    coeffs = {}
    for k, m in itertools.product(range(3), repeat=2):
        alpha = tuple(int(k == j) + int(m == j) for j in range(3))
        cols = [mandel(np.einsum("il,jn,ln->ij", eps[:, k, :], eps[:, m, :], e)) for e in basis]
        mat = np.stack(cols, axis=1)
        coeffs[alpha] = coeffs.get(alpha, 0) + mat
    return DifferentialOperator(3, 2, 6, 6, coeffs, declared_rank=3, name="inc")


def symgrad(dim: int = 3) -> DifferentialOperator:
    pairs = sym_pairs(dim)
    coeffs = {}
    for i in range(dim):
        a = np.zeros((len(pairs), dim))
        for r, (p, q) in enumerate(pairs):
            if p == q:
                if i == p:
                    a[r, p] = 1.0
            else:
                if i == p:
                    a[r, q] += 1.0 / sqrt(2.0)
                if i == q:
                    a[r, p] += 1.0 / sqrt(2.0)
        coeffs[_unit(dim, i)] = a
    return DifferentialOperator(dim, 1, dim, len(pairs), coeffs, declared_rank=dim, name=f"symgrad:{dim}")


def div_antisym(dim: int = 3) -> DifferentialOperator:
    """(Div w)_j = sum_i d_i w_ij for antisymmetric w (upper entries w_ab)."""
    pairs = antisym_pairs(dim)
    if not pairs:
        raise ValueError("divantisym needs d >= 2")
    coeffs = {}
    for i in range(dim):
        a = np.zeros((dim, len(pairs)))
        for c, (p, q) in enumerate(pairs):
            if i == p:   # w_pq contributes d_p w_pq to component q
                a[q, c] += 1.0
            if i == q:   # w_qp = -w_pq contributes to component p
                a[p, c] -= 1.0
        coeffs[_unit(dim, i)] = a
    return DifferentialOperator(dim, 1, len(pairs), dim, coeffs, declared_rank=dim - 1,
                                name=f"divantisym:{dim}")


def _ints(parts, defaults):
    vals = list(defaults)
    for j, p in enumerate(parts):
        vals[j] = int(p)
    return vals


def get(name: str) -> DifferentialOperator:
    head, *rest = name.strip().split(":")
    try:
        if head == "grad":
            d, n = _ints(rest, (3, 1))
            return gradient(d, n)
        if head == "gradk":
            if not rest:
                raise ValueError("gradk needs an order, e.g. gradk:2")
            k, d = _ints(rest, (2, 3))
            return grad_k(k, d)
        if head == "curl":
            (d,) = _ints(rest, (3,))
            return curl(d)
        if head == "rowcurl":
            (d,) = _ints(rest, (2,))
            return rowcurl(d)
        if head == "div":
            (d,) = _ints(rest, (3,))
            return divergence(d)
        if head == "curlcurl" and not rest:
            return curl_curl()
        if head == "inc" and not rest:
            return incompatibility()
        if head == "symgrad":
            (d,) = _ints(rest, (3,))
            return symgrad(d)
        if head == "divantisym":
            (d,) = _ints(rest, (3,))
            return div_antisym(d)
    except (TypeError, IndexError) as exc:  # too many ':' fields
        raise ValueError(f"malformed operator name {name!r}") from exc
    raise ValueError(f"unknown operator name {name!r}")


def partner(op: DifferentialOperator) -> DifferentialOperator | None:
    """Potential operator B with ker A[w] = im B[w], or None if ker A[w] = 0."""
    name = op.name or ""
    head, *rest = name.split(":")
    if head == "curl":
        return gradient(op.dim, 1)
    if head == "curlcurl":
        return gradient(3, 1)
    if head == "rowcurl":
        return gradient(op.dim, op.dim)
    if head == "div":
        return div_antisym(op.dim) if op.dim >= 2 else None
    if head == "inc":
        return symgrad(3)
    return None
