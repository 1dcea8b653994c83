"""Periodic grid fields on the unit torus, microstructures and unfolding.

Fields are sampled at cell centres ``(j + 0.5) / n`` and stored with the grid
axes first and the component axis last, shape ``(n,) * d + (N,)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def cell_centers(n: int, dim: int) -> np.ndarray:
    """Coordinates of the n^d cell centres, shape (n,)*d + (d,)."""
    ax = (np.arange(n) + 0.5) / n
    return np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1)


def frequencies(n: int, dim: int) -> np.ndarray:
    """Integer frequencies in FFT order, values in {-n/2, ..., n/2 - 1}."""
    ax = np.fft.fftfreq(n, 1.0 / n)
    return np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1)


@dataclass(frozen=True, eq=False)
class PeriodicField:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim < 2:
            raise ValueError("field values need at least one grid axis and a component axis")
        grid = v.shape[:-1]
        if len(set(grid)) != 1:
            raise ValueError(f"grid must be cubic, got {grid}")
        if not is_power_of_two(grid[0]):
            raise ValueError(f"resolution {grid[0]} is not a power of two")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, n: int, dim: int, n_comp: int) -> "PeriodicField":
        return cls(np.zeros((n,) * dim + (n_comp,)))

    @classmethod
    def constant(cls, n: int, dim: int, value) -> "PeriodicField":
        value = np.atleast_1d(np.asarray(value, float))
        return cls(np.broadcast_to(value, (n,) * dim + value.shape).copy())

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], n: int, dim: int) -> "PeriodicField":
        vals = np.asarray(fn(cell_centers(n, dim)), float)
        if vals.ndim == dim:
            vals = vals[..., None]
        return cls(vals)

    @property
    def dim(self) -> int:
        return self.values.ndim - 1

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_comp(self) -> int:
        return self.values.shape[-1]

    @property
    def grid_axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim))

    def mean(self) -> np.ndarray:
        return self.values.reshape(-1, self.n_comp).mean(axis=0)

    def norm(self, p: float = 2.0) -> float:
        """Discrete L^p(Q) norm with the Euclidean norm pointwise."""
        pointwise = np.linalg.norm(self.values, axis=-1)
        if np.isinf(p):
            return float(pointwise.max())
        return float(np.mean(pointwise ** p) ** (1.0 / p))

    def inner(self, other: "PeriodicField") -> float:
        return float(np.mean(np.sum(self.values * other.values, axis=-1)))

    def __add__(self, other):
        return PeriodicField(self.values + _vals(other))

    def __sub__(self, other):
        return PeriodicField(self.values - _vals(other))

    def __mul__(self, scalar):
        return PeriodicField(self.values * scalar)

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, PeriodicField) else np.asarray(x)


def dft(field: PeriodicField) -> np.ndarray:
    """Forward transform normalised so that the zero mode is the mean."""
    if not is_power_of_two(field.n):
        raise ValueError(f"resolution {field.n} is not a power of two")
    return np.fft.fftn(field.values, axes=field.grid_axes, norm="forward")


def idft(spectrum: np.ndarray) -> PeriodicField:
    dim = spectrum.ndim - 1
    n = spectrum.shape[0]
    if not is_power_of_two(n):
        raise ValueError(f"resolution {n} is not a power of two")
    return PeriodicField(np.fft.ifftn(spectrum, axes=tuple(range(dim)), norm="forward").real)


def random_field(n: int, dim: int, n_comp: int, seed=None, band: int | None = None) -> PeriodicField:
    """Gaussian field; with ``band`` set, only modes with |xi|_inf <= band survive."""
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((n,) * dim + (n_comp,))
    if band is None:
        return PeriodicField(vals)
    spec = np.fft.fftn(vals, axes=tuple(range(dim)))
    mask = np.max(np.abs(frequencies(n, dim)), axis=-1) <= band
    spec *= mask[..., None]
    return PeriodicField(np.fft.ifftn(spec, axes=tuple(range(dim))).real)


# --------------------------------------------------------------- microstructure

@dataclass(frozen=True, eq=False)
class Microstructure:
    """Indicator of the soft inclusion D0 on an n^d unit-cell grid."""

    chi0: np.ndarray
    margin: int = 1

    def __post_init__(self):
        chi = np.asarray(self.chi0, dtype=bool)
        if chi.ndim < 1 or len(set(chi.shape)) != 1:
            raise ValueError("microstructure grid must be cubic")
        if self.margin < 1:
            raise ValueError("margin must be at least 1 (D0 must be compactly contained in Q)")
        object.__setattr__(self, "chi0", chi)
        n = chi.shape[0]
        if 2 * self.margin >= n:
            raise ValueError("margin leaves no room for an inclusion")
        inner = tuple(slice(self.margin, n - self.margin) for _ in range(chi.ndim))
        guard = chi.copy()
        guard[inner] = False
        if guard.any():
            raise ValueError(f"inclusion touches the guard band of width {self.margin}")
        if chi.all():
            raise ValueError("stiff region D1 is empty")
        if chi.any():
            _, count = ndimage.label(chi)
            if count != 1:
                raise ValueError(f"inclusion D0 has {count} connected components, expected 1")

    @property
    def n(self) -> int:
        return self.chi0.shape[0]

    @property
    def dim(self) -> int:
        return self.chi0.ndim

    @property
    def chi1(self) -> np.ndarray:
        return ~self.chi0

    @property
    def volume_fraction(self) -> float:
        return float(self.chi0.mean())

    @classmethod
    def empty(cls, n: int, dim: int, margin: int = 1) -> "Microstructure":
        return cls(np.zeros((n,) * dim, bool), margin)

    @classmethod
    def box(cls, n: int, dim: int, half_width: float, margin: int = 1) -> "Microstructure":
        x = cell_centers(n, dim) - 0.5
        return cls(np.max(np.abs(x), axis=-1) < half_width, margin)

    @classmethod
    def ball(cls, n: int, dim: int, radius: float, margin: int = 1) -> "Microstructure":
        x = cell_centers(n, dim) - 0.5
        return cls(np.linalg.norm(x, axis=-1) < radius, margin)

    def shifted(self, shift) -> "Microstructure":
        """Lattice translation on the torus; may violate the guard band."""
        return Microstructure(np.roll(self.chi0, shift, axis=tuple(range(self.dim))), self.margin)

    def upsample(self, factor: int) -> np.ndarray:
        out = self.chi0
        for ax in range(self.dim):
            out = np.repeat(out, factor, axis=ax)
        return out


@dataclass(frozen=True, eq=False)
class MicroDomain:
    """Rasterised inclusions on the macro torus, eps = 1/m, s samples per cell."""

    m: int
    s: int
    chi0_eps: np.ndarray
    cell_index: np.ndarray  # (n_omega,)*d + (d,) integer cell coordinates z
    micro_coords: np.ndarray  # (n_omega,)*d + (d,) fast variable y in Q

    @property
    def epsilon(self) -> float:
        return 1.0 / self.m

    @property
    def chi1_eps(self) -> np.ndarray:
        return ~self.chi0_eps

    @property
    def n_omega(self) -> int:
        return self.m * self.s

    @property
    def soft_fraction(self) -> float:
        return float(self.chi0_eps.mean())


def rasterize_microdomain(ms: Microstructure, m: int, s: int) -> MicroDomain:
    if m < 1:
        raise ValueError("m must be a positive integer")
    if s % ms.n:
        raise ValueError(f"samples per cell s={s} must be a multiple of the microstructure resolution {ms.n}")
    cell = ms.upsample(s // ms.n)
    chi = np.tile(cell, (m,) * ms.dim)
    idx = np.stack(np.meshgrid(*([np.arange(m * s)] * ms.dim), indexing="ij"), axis=-1)
    return MicroDomain(m, s, chi, idx // s, (idx % s + 0.5) / s)


# ----------------------------------------------------------------- unfolding

@dataclass(frozen=True, eq=False)
class TwoVariableField:
    """values[c, j, :] is S_eps u(x, y) for x in macro cell c and y the j-th micro sample."""

    values: np.ndarray
    m: int
    s: int
    dim: int

    def norm(self, p: float = 2.0) -> float:
        pointwise = np.linalg.norm(self.values, axis=-1)
        return float(np.mean(pointwise ** p) ** (1.0 / p))

    def cell(self, c: int) -> PeriodicField:
        """The micro field y -> S_eps u(x, y) of one macro cell, on the s-grid."""
        return PeriodicField(self.values[c].reshape((self.s,) * self.dim + (-1,)))


def unfold(u: PeriodicField, m: int) -> TwoVariableField:
    n, d = u.n, u.dim
    if n % m:
        raise ValueError(f"grid resolution {n} is not divisible by m={m}")
    s = n // m
    shape = []
    for _ in range(d):
        shape += [m, s]
    arr = u.values.reshape(shape + [u.n_comp])
    order = [2 * a for a in range(d)] + [2 * a + 1 for a in range(d)] + [2 * d]
    arr = arr.transpose(order).reshape(m ** d, s ** d, u.n_comp)
    return TwoVariableField(arr, m, s, d)


def fold(tv: TwoVariableField) -> PeriodicField:
    d, m, s = tv.dim, tv.m, tv.s
    arr = tv.values.reshape((m,) * d + (s,) * d + (-1,))
    order = []
    for a in range(d):
        order += [a, d + a]
    arr = arr.transpose(order + [2 * d]).reshape((m * s,) * d + (-1,))
    return PeriodicField(arr)


def two_scale_pair(u_eps: PeriodicField, v: Callable[[np.ndarray, np.ndarray], np.ndarray], m: int) -> float:
    """Midpoint quadrature of int_Omega u_eps(x) . v(x, x/eps) dx on the unit torus.

    ``v(x, y)`` receives arrays of shape (..., d) and returns (..., N); the fast
    variable is taken as the exact in-cell coordinate of each grid point.
    """
    n, d = u_eps.n, u_eps.dim
    if n % m:
        raise ValueError(f"grid resolution {n} is not divisible by m={m}")
    s = n // m
    x = cell_centers(n, d)
    idx = np.stack(np.meshgrid(*([np.arange(n)] * d), indexing="ij"), axis=-1)
    y = (idx % s + 0.5) / s
    vals = np.asarray(v(x, y), float)
    if vals.ndim == d:
        vals = vals[..., None]
    return float(np.mean(np.sum(u_eps.values * vals, axis=-1)))
