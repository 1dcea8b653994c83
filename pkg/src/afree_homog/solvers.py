"""Optimisation plumbing shared by the cell and high-contrast solvers.

The feasible sets are linear subspaces with cheap exact projections, so a
projected gradient method needs no multipliers.  Steps follow the two-point
(Barzilai-Borwein) secant rule safeguarded by a nonmonotone Armijo search.
All inner products are grid means, matching the midpoint quadrature.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .fields import PeriodicField

log = logging.getLogger(__name__)

STEP_RULES = ("fixed", "adaptive-secant")
DIRECTIONS = ("steepest", "conjugate")


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 20000
    grad_tol: float = 1e-9
    step_rule: str = "adaptive-secant"
    restarts: int = 0
    seed: int = 0
    dykstra_iters: int = 500
    dykstra_tol: float = 1e-10
    step_size: float = 0.25  # used by the fixed rule and as the first secant step
    laminates: bool = True
    precondition: bool = True
    memory: int = 10  # nonmonotone window
    direction: str = "conjugate"

    def __post_init__(self):
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        for name in ("grad_tol", "dykstra_tol", "step_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_iters", "dykstra_iters", "memory"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")

    def replace(self, **kw) -> "SolveOptions":
        return SolveOptions(**{**asdict(self), **kw})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "SolveOptions":
        return cls(**(d or {}))


@dataclass
class SolveReport:
    value: float
    argmin: PeriodicField
    iterations: int
    grad_norm: float
    residual_A: float = 0.0
    residual_support: float = 0.0
    residual_mean: float = 0.0
    converged: bool = True
    info: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"value": self.value, "iterations": self.iterations, "grad_norm": self.grad_norm,
                "residual_A": self.residual_A, "residual_support": self.residual_support,
                "residual_mean": self.residual_mean, "converged": self.converged,
                **{k: v for k, v in self.info.items() if np.isscalar(v) or isinstance(v, (str, bool))}}


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    iterations: int
    grad_norm: float
    converged: bool


def _mean_inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b) / (a.size / a.shape[-1]))


def projected_gradient(fun_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
                       project: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                       opts: SolveOptions,
                       precondition: np.ndarray | None = None, floor: float = 0.0) -> DescentResult:
    """Minimise over the range of ``project`` starting from ``project(x0)``.

    Directions are projected gradients, optionally combined Polak-Ribiere
    style (``opts.direction == "conjugate"``).  ``precondition`` is an
    optional positive diagonal D (an array broadcasting against x) giving the
    direction -P D P g.  With the secant rule the step along a conjugate
    direction comes from a secant on the directional derivative (exact for
    quadratics); along steepest directions it is the two-point step.  A
    nonmonotone Armijo test guards every step.  Stops when the projected
    gradient norm falls below ``grad_tol * max(1, |initial projected gradient|)``
    or below ``floor`` (the accuracy of an inexact projection).
    """
    conjugate = opts.direction == "conjugate"
    x = project(x0)
    f, g = fun_grad(x)
    pg = project(g)
    gnorm = np.sqrt(_mean_inner(pg, pg))
    target = max(opts.grad_tol * max(1.0, gnorm), floor)
    history = [f]
    alpha = opts.step_size
    z = project(precondition * pg) if precondition is not None else pg
    d = -z
    it = stalled = 0
    while gnorm > target and it < opts.max_iters and stalled < 5:
        it += 1
        slope = _mean_inner(pg, d)
        if slope >= 0:  # lost descent (rounding or a bad conjugate combination): restart
            d = -z
            slope = _mean_inner(pg, d)
            if slope >= 0:
                d, slope = -pg, -gnorm ** 2
        if opts.step_rule == "fixed":
            t = opts.step_size
            x_new = x + t * d
            f_new, g_new = fun_grad(x_new)
        else:
            t = alpha
            if conjugate:
                _, g_try = fun_grad(x + t * d)
                curv = _mean_inner(g_try, d) - slope
                if curv > 0:
                    t = -slope * t / curv
            ref = max(history[-opts.memory:])
            for _ in range(60):
                x_new = x + t * d
                f_new, g_new = fun_grad(x_new)
                if f_new <= ref + 1e-4 * t * slope:
                    break
                t *= 0.5
            else:
                log.debug("line search stalled at iteration %d", it)
                break
        pg_new = project(g_new)
        z_new = project(precondition * pg_new) if precondition is not None else pg_new
        s = x_new - x
        y = pg_new - pg
        if opts.step_rule != "fixed":
            if conjugate:
                alpha = float(np.clip(2.0 * t, 1e-12, 1e12))
            else:
                sy = _mean_inner(s, y)
                ss = _mean_inner(s, s / precondition) if precondition is not None else _mean_inner(s, s)
                alpha = float(np.clip(ss / sy if sy > 0 else 1.0, 1e-12, 1e12))
        if conjugate:
            beta = max(0.0, _mean_inner(z_new, y) / _mean_inner(z, pg))
            d = -z_new + beta * d
        else:
            d = -z_new
        # consecutive steps that change f only at rounding level
        stalled = stalled + 1 if abs(f - f_new) <= 4e-16 * max(1.0, abs(f)) else 0
        x, f, pg, z = x_new, f_new, pg_new, z_new
        gnorm = np.sqrt(_mean_inner(pg, pg))
        history.append(f)
        if not np.isfinite(f):
            break
    ok = gnorm <= target or (stalled >= 5 and gnorm <= 1e3 * target)
    return DescentResult(x, float(f), it, float(gnorm), bool(ok))


@dataclass
class DykstraResult:
    x: np.ndarray
    iterations: int
    residual: float
    rate: float
    converged: bool
    scale: float = 1.0

    @property
    def error_estimate(self) -> float:
        """Absolute distance to the limit suggested by the linear rate."""
        if self.residual == 0:
            return 0.0
        if not 0 < self.rate < 1:
            return self.residual * self.scale
        return self.residual * self.scale / (1.0 - self.rate)


def dykstra(x0: np.ndarray, proj_a: Callable[[np.ndarray], np.ndarray],
            proj_b: Callable[[np.ndarray], np.ndarray], iters: int = 500, tol: float = 1e-10) -> DykstraResult:
    """Dykstra's alternating projections onto the intersection of two convex sets.

    The residual is the distance between consecutive A- and B-iterates,
    relative to max(1, |x0|).  The observed linear rate is the geometric mean
    of the last residual ratios.
    """
    scale = max(1.0, float(np.sqrt(np.mean(x0 * x0))) * np.sqrt(x0.shape[-1]))
    x = x0.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    residuals = []
    for _ in range(iters):
        y = proj_a(x + p)
        p = x + p - y
        x_new = proj_b(y + q)
        q = y + q - x_new
        res = float(np.sqrt(np.mean(np.sum((x_new - y) ** 2, axis=-1)))) / scale
        x = x_new
        residuals.append(res)
        if res <= tol:
            break
    tail = [r for r in residuals[-10:] if r > 0]
    rate = float(np.exp(np.mean(np.diff(np.log(tail))))) if len(tail) > 1 else 0.0
    return DykstraResult(x, len(residuals), residuals[-1] if residuals else 0.0, rate,
                         bool(residuals and residuals[-1] <= tol), scale)
