"""FFT realisation of the projection onto A-free periodic fields.

Conventions
-----------
* ``d/dx_j`` corresponds to multiplication by ``2*pi*i*xi_j`` on the integer
  frequency ``xi``; a k-th order operator therefore acts as
  ``i^k A[2*pi*xi]``.
* A real grid field u is *discretely A-free* when ``A[xi] u_hat(xi) = 0`` at
  every grid frequency ``xi`` in ``{-n/2, ..., n/2-1}^d``.  Because
  ``u_hat(-xi) = conj(u_hat(xi))`` and ``-(-n/2) = -n/2`` modulo n, a Nyquist
  mode is then annihilated both by ``A[xi]`` and by ``A[xi']`` where ``xi'``
  flips the sign of the Nyquist components.  The per-mode projector is onto
  the intersection of the two kernels, which keeps the projection real,
  symmetric and idempotent to rounding for every input, band-limited or not.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import PeriodicField, frequencies, is_power_of_two
from .operators import DEFAULT_TOL, DifferentialOperator, check_potential_pair, kernel_projector, pseudoinverse

ZERO_MEAN = "zero_mean"
KEEP_MEAN = "keep_mean"


def _rfft_frequencies(n: int, dim: int) -> np.ndarray:
    freqs = frequencies(n, dim)
    return freqs[..., : n // 2 + 1, :]


def _nyquist_partner(freqs: np.ndarray, n: int) -> np.ndarray:
    return np.where(freqs == -(n // 2), n // 2, freqs) if n > 1 else freqs


def _rfft(u: np.ndarray, dim: int) -> np.ndarray:
    return np.fft.rfftn(u, axes=tuple(range(dim)), norm="forward")


def _irfft(spec: np.ndarray, n: int, dim: int) -> np.ndarray:
    return np.fft.irfftn(spec, s=(n,) * dim, axes=tuple(range(dim)), norm="forward")


@dataclass(frozen=True, eq=False)
class ProjectionPlan:
    """Cached per-mode projectors for one operator and grid.

    ``op=None`` stands for the unconstrained case: every nonzero mode passes,
    only the mean policy applies.
    """

    op: DifferentialOperator | None
    n: int
    dim: int
    n_comp: int
    zero_mode_policy: str = ZERO_MEAN
    tol: float = DEFAULT_TOL
    matrices: np.ndarray = field(default=None, repr=False)

    @classmethod
    def build(cls, op: DifferentialOperator | None, n: int, zero_mode_policy: str = ZERO_MEAN,
              tol: float = DEFAULT_TOL, *, dim: int | None = None, n_comp: int | None = None) -> "ProjectionPlan":
        if zero_mode_policy not in (ZERO_MEAN, KEEP_MEAN):
            raise ValueError(f"unknown zero-mode policy {zero_mode_policy!r}")
        if not is_power_of_two(n):
            raise ValueError(f"resolution {n} is not a power of two")
        if op is None:
            if dim is None or n_comp is None:
                raise ValueError("an unconstrained plan needs dim and n_comp")
        else:
            dim, n_comp = op.dim, op.in_dim
        freqs = _rfft_frequencies(n, dim)
        if op is None:
            mats = np.broadcast_to(np.eye(n_comp), freqs.shape[:-1] + (n_comp, n_comp)).copy()
        else:
            nrm = np.linalg.norm(freqs, axis=-1, keepdims=True)
            unit = freqs / np.where(nrm > 0, nrm, 1.0)
            partner = _nyquist_partner(freqs, n)
            unit_p = partner / np.where(nrm > 0, nrm, 1.0)
            stacked = np.concatenate([op.symbol(unit), op.symbol(unit_p)], axis=-2)
            mats = kernel_projector(stacked, tol)
        zero = (0,) * dim
        mats[zero] = 0.0 if zero_mode_policy == ZERO_MEAN else np.eye(n_comp)
        mats.setflags(write=False)
        return cls(op, n, dim, n_comp, zero_mode_policy, tol, mats)

    def with_policy(self, zero_mode_policy: str) -> "ProjectionPlan":
        if zero_mode_policy == self.zero_mode_policy:
            return self
        mats = self.matrices.copy()
        mats[(0,) * self.dim] = 0.0 if zero_mode_policy == ZERO_MEAN else np.eye(self.n_comp)
        mats.setflags(write=False)
        return ProjectionPlan(self.op, self.n, self.dim, self.n_comp, zero_mode_policy, self.tol, mats)

    def _check(self, values: np.ndarray):
        expected = (self.n,) * self.dim + (self.n_comp,)
        if values.shape != expected:
            raise ValueError(f"field shape {values.shape} does not match plan shape {expected}")

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Project a raw array of shape (n,)*d + (N,)."""
        self._check(values)
        spec = _rfft(values, self.dim)
        if self.n_comp == 1:
            spec = spec * self.matrices[..., 0, 0][..., None]
        else:
            spec = np.einsum("...ij,...j->...i", self.matrices, spec)
        return _irfft(spec, self.n, self.dim)

    def __call__(self, u: PeriodicField) -> PeriodicField:
        return PeriodicField(self.apply(u.values))


def project_Afree(plan: ProjectionPlan, u: PeriodicField) -> PeriodicField:
    return plan(u)


# ------------------------------------------------------- spectral operators

def apply_operator(op: DifferentialOperator, u: PeriodicField) -> PeriodicField:
    """Spectral evaluation of A u (real part of i^k A[2 pi xi] u_hat)."""
    _check_field(op, u)
    spec = np.fft.fftn(u.values, axes=u.grid_axes, norm="forward")
    sym = op.symbol(2 * np.pi * frequencies(u.n, u.dim))
    out = (1j ** op.order) * np.einsum("...mn,...n->...m", sym, spec)
    return PeriodicField(np.fft.ifftn(out, axes=u.grid_axes, norm="forward").real)


def apply_adjoint(op: DifferentialOperator, psi: PeriodicField) -> PeriodicField:
    """Spectral evaluation of the formal adjoint A* psi = (-1)^k sum A_i^T d^i psi."""
    if psi.n_comp != op.out_dim or psi.dim != op.dim:
        raise ValueError("psi does not match the operator target space")
    spec = np.fft.fftn(psi.values, axes=psi.grid_axes, norm="forward")
    sym = op.symbol(2 * np.pi * frequencies(psi.n, psi.dim))
    out = ((-1j) ** op.order) * np.einsum("...mn,...m->...n", sym, spec)
    return PeriodicField(np.fft.ifftn(out, axes=psi.grid_axes, norm="forward").real)


def apply_grad_k(u: PeriodicField, order: int) -> PeriodicField:
    """All d^k ordered k-th partial derivatives of every component, spectrally."""
    spec = np.fft.fftn(u.values, axes=u.grid_axes, norm="forward")
    xi = 2j * np.pi * frequencies(u.n, u.dim)
    for _ in range(order):
        spec = spec[..., None] * xi.reshape(xi.shape[:-1] + (1,) * (spec.ndim - u.dim) + (u.dim,))
    spec = spec.reshape(spec.shape[: u.dim] + (-1,))
    return PeriodicField(np.fft.ifftn(spec, axes=u.grid_axes, norm="forward").real)


def _check_field(op, u):
    if u.dim != op.dim or u.n_comp != op.in_dim:
        raise ValueError(f"field with d={u.dim}, N={u.n_comp} does not match {op!r}")


def residual_A(op: DifferentialOperator, u: PeriodicField, reference: float | None = None) -> float:
    """Normalised l2 size of A[2 pi xi] u_hat(xi) over the grid modes.

    Divided by (pi n)^k (the largest grid frequency scale), by the largest
    unit-sphere singular value of the symbol and by ``reference`` (default: the
    L2 norm of u itself).  A generic random field gives a value of order one and
    a discretely A-free field gives rounding.  Pass the norm of the unprojected
    input as ``reference`` when u may itself be rounding-sized.
    """
    _check_field(op, u)
    if reference is None:
        reference = u.norm()
    if reference == 0:
        return 0.0
    spec = np.fft.fftn(u.values, axes=u.grid_axes, norm="forward")
    sym = op.symbol(2 * np.pi * frequencies(u.n, u.dim))
    au = np.einsum("...mn,...n->...m", sym, spec)
    total = np.sqrt(np.sum(np.abs(au) ** 2))
    scale = (np.pi * u.n) ** op.order * op.unit_symbol_norm
    return float(total / (scale * reference))


@dataclass(frozen=True)
class KornGap:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else np.inf
        return self.lhs / self.rhs


def korn_gap(op: DifferentialOperator, u: PeriodicField, plan: ProjectionPlan | None = None) -> KornGap:
    """||grad^k (u - Pi u)||_2 against ||A u||_2, both computed spectrally."""
    _check_field(op, u)
    if plan is None:
        plan = ProjectionPlan.build(op, u.n, KEEP_MEAN)
    w = u.values - plan.apply(u.values)
    freqs = 2 * np.pi * frequencies(u.n, u.dim)
    mag = np.sum(freqs ** 2, axis=-1) ** op.order
    w_hat = np.fft.fftn(w, axes=u.grid_axes, norm="forward")
    lhs = np.sqrt(np.sum(mag[..., None] * np.abs(w_hat) ** 2))
    u_hat = np.fft.fftn(u.values, axes=u.grid_axes, norm="forward")
    au = np.einsum("...mn,...n->...m", op.symbol(freqs), u_hat)
    rhs = np.sqrt(np.sum(np.abs(au) ** 2))
    return KornGap(float(lhs), float(rhs))


def recover_potential(op_b: DifferentialOperator, u: PeriodicField, tol: float = 1e-8, *,
                      op_a: DifferentialOperator | None = None) -> PeriodicField:
    """Zero-mean w with B w = u, via w_hat = (-i)^k B[2 pi xi]^+ u_hat.

    With ``op_a`` given, the pair is checked for compatibility and u must be
    A-free up to ``tol`` (as measured by :func:`residual_A`).
    """
    if u.dim != op_b.dim or u.n_comp != op_b.out_dim:
        raise ValueError(f"field with d={u.dim}, N={u.n_comp} is not in the range space of {op_b!r}")
    if op_a is not None:
        chk = check_potential_pair(op_a, op_b)
        if not chk.compatible:
            raise ValueError(f"{op_a!r} and {op_b!r} are not a potential pair ({chk.detail})")
        res = residual_A(op_a, u)
        if res > tol:
            raise ValueError(f"field is not A-free: residual {res:.3e} > tol {tol:.1e}")
    spec = np.fft.fftn(u.values, axes=u.grid_axes, norm="forward")
    freqs = frequencies(u.n, u.dim)
    nrm = np.linalg.norm(freqs, axis=-1, keepdims=True)
    unit = freqs / np.where(nrm > 0, nrm, 1.0)
    # B[2 pi xi]^+ = (2 pi |xi|)^(-k) B[unit]^+
    pinv = pseudoinverse(op_b.symbol(unit))
    radius = nrm[..., 0]
    scale = np.where(radius > 0, (2 * np.pi * np.where(radius > 0, radius, 1.0)) ** (-float(op_b.order)), 0.0)
    w_hat = ((-1j) ** op_b.order) * scale[..., None] * np.einsum("...nm,...m->...n", pinv, spec)
    w_hat[(0,) * u.dim] = 0.0
    return PeriodicField(np.fft.ifftn(w_hat, axes=u.grid_axes, norm="forward").real)
