"""High-contrast energies on the micro-structured torus and the Gamma-sweep.

The macro domain is the unit torus, eps = 1/m, and every period cell carries
``s`` samples per axis, so the grid has n = m * s points per axis.  The
energy is

    F_eps(u) = mean( chi_0 f_{0,eps}(eps u) + chi_1 f_1(x/eps, u) )

over discretely A-free u (constants allowed).  The limit functional is
evaluated on constant fields only: alpha_0 + min_xi f_hom(xi).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .cells import alpha0_cell, fhom_limit
from .fields import MicroDomain, Microstructure, PeriodicField, rasterize_microdomain, two_scale_pair
from .integrands import Integrand, SoftFamily
from .operators import DifferentialOperator
from .projection import KEEP_MEAN, ProjectionPlan, residual_A
from .solvers import SolveOptions, SolveReport, projected_gradient

log = logging.getLogger(__name__)

LIMIT_HEADER = "limit functional minimised over constant fields u = xi"


@dataclass(frozen=True, eq=False)
class HighContrastProblem:
    op: DifferentialOperator
    f0: SoftFamily
    f1: Integrand
    ms: Microstructure
    m: int
    s: int
    opts: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        object.__setattr__(self, "f0", SoftFamily.of(self.f0))
        if self.ms.dim != self.op.dim:
            raise ValueError("microstructure and operator dimensions differ")
        if self.f0.n_comp != self.op.in_dim or self.f1.n_comp != self.op.in_dim:
            raise ValueError("integrands must act on the operator's domain space")
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.s % self.ms.n:
            raise ValueError(f"s={self.s} must be a multiple of the microstructure resolution {self.ms.n}")

    @property
    def epsilon(self) -> float:
        return 1.0 / self.m

    @property
    def n(self) -> int:
        return self.m * self.s

    @property
    def domain(self) -> MicroDomain:
        return rasterize_microdomain(self.ms, self.m, self.s)

    def with_m(self, m: int) -> "HighContrastProblem":
        return replace(self, m=m)


def _arrays(prob: HighContrastProblem):
    dom = prob.domain
    chi0 = dom.chi0_eps.astype(float)
    y = dom.micro_coords if prob.f1.y_dependent else None
    return chi0, 1.0 - chi0, y


def _check_u(prob, u) -> np.ndarray:
    vals = u.values if isinstance(u, PeriodicField) else np.asarray(u, float)
    expected = (prob.n,) * prob.op.dim + (prob.op.in_dim,)
    if vals.shape != expected:
        raise ValueError(f"field shape {vals.shape} does not match the grid {expected}")
    return vals


def energy_parts(prob: HighContrastProblem, u) -> tuple[float, float]:
    """(soft, stiff) contributions to F_eps(u)."""
    vals = _check_u(prob, u)
    chi0, chi1, y = _arrays(prob)
    eps = prob.epsilon
    soft = float(np.mean(chi0 * prob.f0.value(eps * vals, eps)))
    stiff = float(np.mean(chi1 * prob.f1.value(vals, y)))
    return soft, stiff


def energy_Feps(prob: HighContrastProblem, u) -> float:
    soft, stiff = energy_parts(prob, u)
    return soft + stiff


def _objective(prob: HighContrastProblem):
    chi0, chi1, y = _arrays(prob)
    eps = prob.epsilon
    c0, c1 = chi0[..., None], chi1[..., None]

    def fun_grad(v):
        z = eps * v
        val = np.mean(chi0 * prob.f0.value(z, eps) + chi1 * prob.f1.value(v, y))
        grad = c0 * (eps * prob.f0.grad(z, eps)) + c1 * prob.f1.grad(v, y)
        return float(val), grad

    return fun_grad, chi0, chi1


def minimize_Feps(prob: HighContrastProblem, xi_star=None, init=None) -> SolveReport:
    """Minimise F_eps over discretely A-free fields (mean kept free).

    Starts from ``init`` if given, else from xi_star on the stiff region and
    zero on the inclusions (projected), else from zero.
    """
    opts = prob.opts
    plan = ProjectionPlan.build(prob.op, prob.n, KEEP_MEAN)
    fun_grad, chi0, chi1 = _objective(prob)
    shape = (prob.n,) * prob.op.dim + (prob.op.in_dim,)
    if init is not None:
        x0 = _check_u(prob, init)
    elif xi_star is not None:
        x0 = chi1[..., None] * np.broadcast_to(np.asarray(xi_star, float), shape)
    else:
        x0 = np.zeros(shape)
    precond = None
    if opts.precondition and prob.f0.base.quadratic_form:
        # soft block has curvature ~ eps^2: rescale its gradient
        precond = (chi1 + chi0 / prob.epsilon ** 2)[..., None]
    out = projected_gradient(fun_grad, plan.apply, x0, opts, precondition=precond)
    u = PeriodicField(out.x)
    res = residual_A(prob.op, u, reference=max(u.norm(), 1.0))
    soft, stiff = energy_parts(prob, u)
    info = {"m": prob.m, "epsilon": prob.epsilon, "n": prob.n, "soft_energy": soft, "stiff_energy": stiff,
            "preconditioned": precond is not None}
    return SolveReport(out.value, u, out.iterations, out.grad_norm, res, 0.0, 0.0,
                       bool(out.converged and res <= 1e-8), info)


# ------------------------------------------------------------------ limit

@dataclass
class LimitResult:
    xi_star: np.ndarray
    fhom_value: float
    alpha0: float
    value: float
    grid_values: list[float]
    alpha0_report: SolveReport
    label: str = LIMIT_HEADER
    converged: bool = True


def _axis_spacing(grid: np.ndarray, axis: int) -> float:
    vals = np.unique(grid[:, axis])
    return float(np.min(np.diff(vals))) if vals.size > 1 else 1.0


def minimize_limit(op: DifferentialOperator, f1: Integrand, f0, ms: Microstructure, xi_grid, n_cell: int,
                   opts: SolveOptions | None = None, k_list=(1,), refine: bool = True) -> LimitResult:
    """alpha_0 + min over constant xi of f_hom(xi): grid search, then per-axis bounded refinement."""
    opts = opts or SolveOptions()
    grid = np.atleast_2d(np.asarray(xi_grid, float))
    if grid.size == 0:
        raise ValueError("xi_grid is empty")
    if grid.shape[-1] != op.in_dim:
        raise ValueError(f"xi_grid points need {op.in_dim} components")
    converged = True

    def f_hom(xi):
        nonlocal converged
        table = fhom_limit(op, f1, ms, xi, k_list, n_cell, opts)
        converged &= table.converged
        return table.liminf_estimate

    values = [f_hom(xi) for xi in grid]
    j = int(np.argmin(values))
    xi_best, best = grid[j].copy(), values[j]
    if refine and len(grid) > 1:
        for axis in range(op.in_dim):
            h = _axis_spacing(grid, axis)

            def along(t, axis=axis, base=xi_best.copy()):
                xi = base.copy()
                xi[axis] = t
                return f_hom(xi)

            c = xi_best[axis]
            res = minimize_scalar(along, bounds=(c - h, c + h), method="bounded", options={"xatol": 1e-6})
            if res.fun < best:
                best = float(res.fun)
                xi_best[axis] = float(res.x)
    soft = SoftFamily.of(f0).base
    a0 = alpha0_cell(op, soft, ms, n_cell, opts)
    converged &= a0.converged
    label = LIMIT_HEADER if f1.convex else LIMIT_HEADER + " (constant-competitor bound)"
    return LimitResult(xi_best, float(best), a0.value, a0.value + float(best), values, a0, label, converged)


# ------------------------------------------------------------------ sweep

def _default_test(x, y):
    """Smooth oscillating test function for the two-scale pairing."""
    w = np.cos(2 * np.pi * x[..., 0]) * (1.0 + np.cos(2 * np.pi * y[..., 0]))
    return w[..., None]


@dataclass
class SweepRow:
    m: int
    epsilon: float
    minFeps: float
    predicted: float
    gap: float
    iters: int
    residual_A: float
    converged: bool
    eps_mean: float = 0.0
    pairing: float = 0.0
    soft_energy: float = 0.0
    stiff_energy: float = 0.0

    CSV_COLUMNS = ("m", "epsilon", "minFeps", "predicted", "gap", "iters", "residual_A", "converged")

    def csv_row(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]


@dataclass
class GammaSweepReport:
    rows: list[SweepRow]
    limit: LimitResult
    richardson: float | None = None
    richardson_order: float | None = None

    @property
    def predicted(self) -> float:
        return self.limit.value

    @property
    def gaps(self) -> list[float]:
        return [r.gap for r in self.rows]

    @property
    def monotone(self) -> bool:
        """Gaps non-increasing along decreasing eps, within 10% slack."""
        g = self.gaps
        return all(b <= 1.1 * a for a, b in zip(g, g[1:]))

    @property
    def final_relative_gap(self) -> float:
        gap = self.rows[-1].gap
        p = abs(self.predicted)
        if p == 0:
            return 0.0 if gap == 0 else float("inf")
        return gap / p

    @property
    def richardson_gap(self) -> float | None:
        return None if self.richardson is None else abs(self.richardson - self.predicted)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.rows) and self.limit.converged


def richardson_limit(eps: list[float], values: list[float]) -> tuple[float | None, float | None]:
    """Extrapolate values ~ L + C eps^q from the last three entries of an eps-halving sequence."""
    if len(values) < 3:
        return None, None
    e0, e1, e2 = eps[-3:]
    v0, v1, v2 = values[-3:]
    if not (np.isclose(e0 / e1, 2.0) and np.isclose(e1 / e2, 2.0)):
        return None, None
    d1, d2 = v1 - v0, v2 - v1
    if d1 == 0 or d2 == 0 or d1 / d2 <= 1:
        return float(v2), None
    q = float(np.log2(d1 / d2))
    return float(v2 + d2 / (2.0 ** q - 1.0)), q


def gamma_sweep(template: HighContrastProblem, m_list, xi_grid, k_list=(1,),
                test_function=_default_test) -> GammaSweepReport:
    """Minimise F_eps for eps = 1/m over ``m_list`` and compare with the limit value."""
    m_list = [int(m) for m in m_list]
    if not m_list:
        raise ValueError("m_list is empty")
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise ValueError("m_list must be strictly ascending")
    limit = minimize_limit(template.op, template.f1, template.f0, template.ms, xi_grid, template.s,
                           template.opts, k_list)
    rows = []
    for m in m_list:
        prob = template.with_m(m)
        rep = minimize_Feps(prob, xi_star=limit.xi_star)
        u = rep.argmin
        rows.append(SweepRow(m, prob.epsilon, rep.value, limit.value, abs(rep.value - limit.value),
                             rep.iterations, rep.residual_A, rep.converged,
                             eps_mean=float(prob.epsilon * np.linalg.norm(u.mean())),
                             pairing=two_scale_pair(u, test_function, m),
                             soft_energy=rep.info["soft_energy"], stiff_energy=rep.info["stiff_energy"]))
        log.info("m=%d min F_eps=%.12g gap=%.3e iters=%d", m, rep.value, rows[-1].gap, rep.iterations)
    extrap, order = richardson_limit([r.epsilon for r in rows], [r.minFeps for r in rows])
    report = GammaSweepReport(rows, limit, extrap, order)
    if len(rows) > 1 and not report.monotone:
        log.warning("gap sequence is not non-increasing within 10%% slack: %s", report.gaps)
    return report
