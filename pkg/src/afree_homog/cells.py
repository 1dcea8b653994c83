"""Unit-cell variational problems.

* :func:`qa_envelope`  relaxed density: inf of the cell mean of g(xi + v) over
  zero-mean discretely A-free v.
* :func:`fhom` / :func:`fhom_limit`  perforated cell problem of the stiff matrix
  at scale 1/k and its table over k.
* :func:`alpha0_cell`  residual energy of the soft inclusions, with v forced
  to vanish on the stiff region.
* :func:`counterexample_gap`  the checkerboard evaluation showing that the
  relaxed soft density is not the right lower bound without high contrast.

For nonconvex integrands the returned value is the best local minimum found
and is labelled an upper bound on the discrete minimum.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .fields import Microstructure, PeriodicField, cell_centers, random_field
from .integrands import Integrand
from .operators import DifferentialOperator, canonical_directions, kernel_projector
from .projection import KEEP_MEAN, ZERO_MEAN, ProjectionPlan, residual_A
from .solvers import SolveOptions, SolveReport, dykstra, projected_gradient

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
MEAN_TOL = 1e-10
SUPPORT_TOL = 1e-8


def _xi_vector(xi, n_comp: int) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, float))
    if xi.shape != (n_comp,):
        raise ValueError(f"xi must have {n_comp} components, got shape {xi.shape}")
    return xi


def _plan(op, n, policy, dim, n_comp) -> ProjectionPlan:
    return ProjectionPlan.build(op, n, policy, dim=dim, n_comp=n_comp)


def _feasibility(op, v: np.ndarray, scale: float) -> tuple[float, float]:
    """(A-residual relative to max(|v|, scale), max |mean|)."""
    field = PeriodicField(v)
    res = 0.0 if op is None else residual_A(op, field, reference=max(field.norm(), scale))
    mean = float(np.max(np.abs(field.mean()))) if v.size else 0.0
    return res, mean


# ------------------------------------------------------------ laminate starts

def _kernel_basis(op, direction: np.ndarray, n_comp: int) -> np.ndarray:
    if op is None:
        return np.eye(n_comp)
    unit = direction / np.linalg.norm(direction)
    proj = kernel_projector(op.symbol(unit)[None])[0]
    w, vecs = np.linalg.eigh(proj)
    return vecs[:, w > 0.5].T


def _amplitudes(f: Integrand, basis: np.ndarray) -> list[np.ndarray]:
    """Kernel basis vectors, their pairwise sums and differences, and for a
    double well the kernel component of the well difference."""
    out = list(basis)
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            out += [(basis[i] + basis[j]) / np.sqrt(2), (basis[i] - basis[j]) / np.sqrt(2)]
    if f.kind == "double_well" and len(basis):
        diff = basis.T @ (basis @ (f.params["a"] - f.params["b"]))
        if np.linalg.norm(diff) > 1e-12:
            out.append(diff / np.linalg.norm(diff))
    return out


def _laminate_candidates(f: Integrand, op, xi: np.ndarray, n: int, dim: int, keep: int = 4):
    """Best two-phase laminates v = t a (1[w.idx mod n < j] - j/n) ranked by energy."""
    n_comp = xi.size
    t_max = 4.0 * (1.0 + np.linalg.norm(xi))
    t_grid = np.linspace(-t_max, t_max, 201)
    theta = np.arange(1, n) / n
    found = []
    for w in canonical_directions(dim):
        w_int = np.rint(w * np.sqrt(np.sum(np.abs(w) > 0))).astype(int)
        if w_int[np.flatnonzero(w_int)[0]] < 0:
            continue  # -w gives the same laminates
        for a in _amplitudes(f, _kernel_basis(op, w.astype(float), n_comp)):
            th, tt = theta[:, None, None], t_grid[None, :, None]
            e = th[..., 0] * f.value(xi + (1 - th) * tt * a) + (1 - th[..., 0]) * f.value(xi - th * tt * a)
            j_idx, t_idx = np.unravel_index(np.argsort(e, axis=None)[:keep], e.shape)
            for jj, ti in zip(j_idx, t_idx):
                th1 = theta[jj]

                def two_phase(t, th1=th1, a=a):
                    return th1 * f.value(xi + (1 - th1) * t * a) + (1 - th1) * f.value(xi - th1 * t * a)

                dt = t_grid[1] - t_grid[0]
                res = minimize_scalar(two_phase, bounds=(t_grid[ti] - dt, t_grid[ti] + dt), method="bounded",
                                      options={"xatol": 1e-12})
                found.append((float(res.fun), w_int, a, int(jj) + 1, float(res.x)))
    found.sort(key=lambda r: r[0])
    return found[:keep]


def _laminate_field(w_int, a, j, t, n, dim) -> np.ndarray:
    idx = np.stack(np.meshgrid(*([np.arange(n)] * dim), indexing="ij"), axis=-1)
    phase = (idx @ w_int) % n
    profile = (phase < j).astype(float) - j / n
    return t * profile[..., None] * a


# ----------------------------------------------------------------- envelope

def qa_envelope(op: DifferentialOperator | None, f: Integrand, xi, n: int,
                opts: SolveOptions | None = None, *, dim: int | None = None) -> SolveReport:
    """Discrete A-quasiconvex envelope of ``f`` at ``xi`` on the n-grid.

    ``op=None`` drops the differential constraint (every zero-mean field is
    admissible); ``dim`` must then be given.
    """
    opts = opts or SolveOptions()
    if f.y_dependent:
        raise ValueError("the envelope needs a y-independent integrand")
    if op is not None:
        if f.n_comp != op.in_dim:
            raise ValueError(f"integrand has {f.n_comp} components, operator acts on {op.in_dim}")
        dim = op.dim
    elif dim is None:
        raise ValueError("an unconstrained envelope needs dim")
    xi = _xi_vector(xi, f.n_comp)
    plan = _plan(op, n, ZERO_MEAN, dim, f.n_comp)

    def fun_grad(v):
        z = xi + v
        return float(np.mean(f.value(z))), f.grad(z)

    starts = [np.zeros((n,) * dim + (f.n_comp,))]
    if not f.convex:
        rng = np.random.default_rng(opts.seed)
        for _ in range(opts.restarts):
            amp = 1.0 + np.linalg.norm(xi)
            starts.append(amp * random_field(n, dim, f.n_comp, rng, band=max(1, n // 8)).values)
        if opts.laminates:
            for _, w_int, a, j, t in _laminate_candidates(f, op, xi, n, dim):
                starts.append(_laminate_field(w_int, a, j, t, n, dim))
    best, runs = None, []
    total_iters = 0
    for x0 in starts:
        out = projected_gradient(fun_grad, plan.apply, x0, opts)
        total_iters += out.iterations
        runs.append(out.value)
        if best is None or out.value < best.value - 1e-14:
            best = out
    res_a, res_mean = _feasibility(op, best.x, 1.0 + np.linalg.norm(xi))
    converged = best.converged and res_a <= RESIDUAL_TOL and res_mean <= MEAN_TOL
    info = {"f_at_xi": float(f.value(xi)), "starts": len(starts), "total_iterations": total_iters,
            "upper_bound": not f.convex, "start_values": runs}
    return SolveReport(best.value, PeriodicField(best.x), best.iterations, best.grad_norm,
                       res_a, 0.0, res_mean, converged, info)


# --------------------------------------------------------------------- f_hom

def stiff_indicator(ms: Microstructure, k: int, n: int) -> np.ndarray:
    """Indicator of the union of the stiff sets k^-1 (D1 + z) on the n-grid."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    if n % (k * ms.n):
        raise ValueError(f"n={n} is not divisible by k * microstructure resolution = {k * ms.n}")
    cell = np.asarray(~ms.chi0)
    factor = n // (k * ms.n)
    for ax in range(ms.dim):
        cell = np.repeat(cell, factor, axis=ax)
    return np.tile(cell, (k,) * ms.dim)


def fast_coordinate(k: int, n: int, dim: int) -> np.ndarray:
    """Fractional part of k*y at the cell centres (the argument of a 1-periodic f1)."""
    return np.mod(k * cell_centers(n, dim), 1.0)


def fhom(op: DifferentialOperator, f1: Integrand, ms: Microstructure, xi, k: int, n: int,
         opts: SolveOptions | None = None) -> SolveReport:
    """Perforated cell problem at scale 1/k on the n-grid (n is the total resolution)."""
    opts = opts or SolveOptions()
    if ms.dim != op.dim:
        raise ValueError("microstructure and operator dimensions differ")
    if f1.n_comp != op.in_dim:
        raise ValueError(f"integrand has {f1.n_comp} components, operator acts on {op.in_dim}")
    xi = _xi_vector(xi, f1.n_comp)
    chi = stiff_indicator(ms, k, n).astype(float)
    y = fast_coordinate(k, n, op.dim) if f1.y_dependent else None
    plan = _plan(op, n, ZERO_MEAN, op.dim, op.in_dim)

    def fun_grad(v):
        z = xi + v
        return float(np.mean(chi * f1.value(z, y))), chi[..., None] * f1.grad(z, y)

    starts = [np.zeros((n,) * op.dim + (op.in_dim,))]
    if not f1.convex:
        rng = np.random.default_rng(opts.seed)
        for _ in range(opts.restarts):
            starts.append((1.0 + np.linalg.norm(xi)) * random_field(n, op.dim, op.in_dim, rng,
                                                                   band=max(1, n // 8)).values)
    best = None
    for x0 in starts:
        out = projected_gradient(fun_grad, plan.apply, x0, opts)
        if best is None or out.value < best.value - 1e-14:
            best = out
    res_a, res_mean = _feasibility(op, best.x, 1.0 + np.linalg.norm(xi))
    converged = best.converged and res_a <= RESIDUAL_TOL and res_mean <= MEAN_TOL
    info = {"k": k, "n": n, "stiff_fraction": float(chi.mean()), "upper_bound": not f1.convex}
    return SolveReport(best.value, PeriodicField(best.x), best.iterations, best.grad_norm,
                       res_a, 0.0, res_mean, converged, info)


@dataclass
class FhomTable:
    xi: np.ndarray
    k_values: list[int]
    n_cell: int
    reports: list[SolveReport]

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.reports]

    @property
    def liminf_estimate(self) -> float:
        """Minimum over the tail (second half) of the table."""
        tail = self.values[len(self.values) // 2:]
        return float(min(tail))

    @property
    def stabilization_gap(self) -> float:
        v = self.values
        return float(abs(v[-1] - v[-2])) if len(v) > 1 else 0.0

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.reports)

    def rows(self) -> list[dict]:
        return [{"k": k, "n": k * self.n_cell, "value": r.value, "iters": r.iterations,
                 "residual_A": r.residual_A, "converged": r.converged}
                for k, r in zip(self.k_values, self.reports)]


def fhom_limit(op: DifferentialOperator, f1: Integrand, ms: Microstructure, xi, k_list, n_cell: int,
               opts: SolveOptions | None = None) -> FhomTable:
    """Run :func:`fhom` for each k with ``n_cell`` samples per period (total n = k * n_cell)."""
    k_list = [int(k) for k in k_list]
    if not k_list:
        raise ValueError("k_list is empty")
    if any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ValueError("k_list must be strictly ascending")
    reports = [fhom(op, f1, ms, xi, k, k * n_cell, opts) for k in k_list]
    return FhomTable(_xi_vector(xi, f1.n_comp), k_list, n_cell, reports)


# -------------------------------------------------------------------- alpha_0

def alpha0_cell(op: DifferentialOperator, f0: Integrand, ms: Microstructure, n: int,
                opts: SolveOptions | None = None) -> SolveReport:
    """Soft-inclusion constant: min of the integral over D0 of f0(v) with v = 0 on D1 and v A-free.

    Projection onto the intersection of the A-free subspace (mean kept) and
    the support subspace is done by Dykstra's iteration; ``info["mean"]``
    reports the mean of the minimiser as a diagnostic.
    """
    opts = opts or SolveOptions()
    if f0.y_dependent:
        raise ValueError("alpha0 needs a y-independent soft density")
    if ms.dim != op.dim or f0.n_comp != op.in_dim:
        raise ValueError("operator, integrand and microstructure do not match")
    if n % ms.n:
        raise ValueError(f"n={n} is not a multiple of the microstructure resolution {ms.n}")
    chi0 = ms.upsample(n // ms.n).astype(float)
    plan = _plan(op, n, KEEP_MEAN, op.dim, op.in_dim)
    support = chi0[..., None]
    worst = {"residual": 0.0, "iterations": 0, "rate": 0.0, "converged": True, "error": 0.0}

    def project(v):
        out = dykstra(v, plan.apply, lambda w: w * support, opts.dykstra_iters, opts.dykstra_tol)
        if out.residual >= worst["residual"]:
            worst.update(residual=out.residual, rate=out.rate)
        worst["error"] = max(worst["error"], out.error_estimate)
        worst["iterations"] = max(worst["iterations"], out.iterations)
        worst["converged"] &= out.converged
        if out.rate:
            log.debug("dykstra: %d iterations, rate %.6f", out.iterations, out.rate)
        return out.x

    def fun_grad(v):
        return float(np.mean(chi0 * f0.value(v))), support * f0.grad(v)

    zero = np.zeros((n,) * op.dim + (op.in_dim,))
    starts = [zero]
    if not f0.convex:
        rng = np.random.default_rng(opts.seed)
        for _ in range(opts.restarts):
            starts.append(support * random_field(n, op.dim, op.in_dim, rng, band=max(1, n // 8)).values)
    # the projection is inexact; gradients below its accuracy carry no information
    project(fun_grad(zero)[1])
    floor = 10.0 * worst["error"] * np.sqrt(op.in_dim)
    best = None
    for x0 in starts:
        out = projected_gradient(fun_grad, project, x0, opts, floor=floor)
        if best is None or out.value < best.value - 1e-14:
            best = out
    v = best.x
    field = PeriodicField(v)
    res_a = residual_A(op, field, reference=max(field.norm(), 1.0))
    res_support = float(np.max(np.abs(v * (1.0 - support)))) if v.size else 0.0
    mean = field.mean()
    converged = (best.converged and worst["converged"] and res_a <= RESIDUAL_TOL
                 and res_support <= SUPPORT_TOL)
    info = {"soft_fraction": float(chi0.mean()), "mean": mean.tolist(), "dykstra_iterations": worst["iterations"],
            "dykstra_residual": worst["residual"], "dykstra_rate": worst["rate"],
            "dykstra_error": worst["error"], "upper_bound": not f0.convex}
    return SolveReport(best.value, field, best.iterations, best.grad_norm, res_a, res_support,
                       float(np.max(np.abs(mean))), converged, info)


# ------------------------------------------------------------- counterexample

@dataclass
class CounterexampleTable:
    eps: list[float]
    values: list[float]
    closed_form: list[float]
    reference: float  # relaxed soft density at 0
    reference_report: SolveReport

    def rows(self) -> list[dict]:
        return [{"epsilon": e, "value": v, "closed_form": c, "reference_QAf0": self.reference}
                for e, v, c in zip(self.eps, self.values, self.closed_form)]


def checkerboard_field(eps: float, samples: int = 2) -> np.ndarray:
    """w_eps = a_eps + eps I on the unit square, a_eps the +-I checkerboard of side eps.

    Returned as (n, n, 4) with 2x2 matrices stored row-major; ``samples`` grid
    points per checkerboard square.
    """
    m = 1.0 / eps
    if abs(m - round(m)) > 1e-12 or round(m) % 2:
        raise ValueError("1/eps must be an even integer so that the checkerboard tiles the square")
    m = int(round(m))
    n = m * samples
    x = cell_centers(n, 2)
    sign = np.where(np.sum(np.floor(x * m), axis=-1) % 2 == 0, 1.0, -1.0)
    diag = sign + eps
    out = np.zeros((n, n, 4))
    out[..., 0] = diag
    out[..., 3] = diag
    return out


def counterexample_gap(eps_list, omega_measure: float = 1.0, d_measure: float = 1.0,
                       opts: SolveOptions | None = None) -> CounterexampleTable:
    """Midpoint quadrature of -det(w_eps) over Omega' x D for each eps.

    w_eps does not depend on the fast variable, so the D integral is a factor
    |D|.  The reference relaxed density Q_A(-det)(0) is computed with the
    row-curl constraint on 2x2 matrix fields.
    """
    from .catalog import rowcurl

    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("eps_list is empty")
    f0 = Integrand.neg_det()
    values, closed = [], []
    for eps in eps_list:
        w = checkerboard_field(eps)
        values.append(float(np.mean(f0.value(w))) * omega_measure * d_measure)
        closed.append(-(1.0 + eps ** 2) * omega_measure * d_measure)
    ref = qa_envelope(rowcurl(2), f0, np.zeros(4), 8, opts)
    return CounterexampleTable(eps_list, values, closed, ref.value, ref)
