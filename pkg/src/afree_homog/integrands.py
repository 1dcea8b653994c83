"""Energy densities f(y, xi) with analytic gradients in xi and growth data.

Every integrand exposes ``value(xi, y)`` and ``grad(xi, y)`` on stacked
arrays: ``xi`` has shape (..., N) and ``y`` (the fast variable in the unit
cell) has shape (..., d) or is None for y-independent densities.

Growth data follow the usual hypotheses

    lam * (-a + |xi|^p) <= f(y, xi) <= Lam * (1 + |xi|^p)
    |f(y, xi) - f(y, eta)| <= mu * (1 + |xi|^(p-1) + |eta|^(p-1)) * |xi - eta|

and are derived in closed form per family.  ``neg_det`` is not coercive
(lam = 0) and is only meant for the relaxation counterexample.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

KINDS = ("quadratic", "p_power", "double_well", "neg_det", "oscillatory_quadratic")


@dataclass(frozen=True)
class GrowthParams:
    p: float
    a: float
    lam: float
    Lam: float
    mu: float

    @property
    def coercive(self) -> bool:
        return self.lam > 0


def _weight_bounds(amplitude: float) -> tuple[float, float]:
    return 1.0 - abs(amplitude), 1.0 + abs(amplitude)


@dataclass(frozen=True, eq=False)
class Integrand:
    """A density from the built-in families; build with the classmethods."""

    kind: str
    n_comp: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown integrand kind {self.kind!r}")

    # ---------------------------------------------------------- constructors
    @classmethod
    def quadratic(cls, Q, b=None, c: float = 0.0) -> "Integrand":
        Q = np.atleast_2d(np.asarray(Q, float))
        Q = 0.5 * (Q + Q.T)
        if np.linalg.eigvalsh(Q).min() < -1e-12:
            raise ValueError("quadratic form must be positive semidefinite")
        n = Q.shape[0]
        b = np.zeros(n) if b is None else np.asarray(b, float).reshape(n)
        return cls("quadratic", n, {"Q": Q, "b": b, "c": float(c)})

    @classmethod
    def squared_distance(cls, b) -> "Integrand":
        """|xi - b|^2."""
        b = np.atleast_1d(np.asarray(b, float))
        return cls.quadratic(np.eye(b.size), b)

    @classmethod
    def p_power(cls, p: float, n_comp: int, weight: float = 1.0, amplitude: float = 0.0) -> "Integrand":
        """w(y) |xi|^p with w(y) = weight * (1 + amplitude * mean_j cos(2 pi y_j))."""
        if p <= 1:
            raise ValueError("p must exceed 1")
        if weight <= 0 or abs(amplitude) >= 1:
            raise ValueError("weight must stay positive")
        return cls("p_power", n_comp, {"p": float(p), "weight": float(weight), "amplitude": float(amplitude)})

    @classmethod
    def double_well(cls, well_a, well_b, stiffness: float = 1.0) -> "Integrand":
        """stiffness * |xi - a|^2 |xi - b|^2."""
        a = np.atleast_1d(np.asarray(well_a, float))
        b = np.atleast_1d(np.asarray(well_b, float))
        if a.shape != b.shape:
            raise ValueError("wells must have the same dimension")
        return cls("double_well", a.size, {"a": a, "b": b, "stiffness": float(stiffness)})

    @classmethod
    def neg_det(cls) -> "Integrand":
        """-det of a 2x2 matrix stored row-major as a 4-vector."""
        return cls("neg_det", 4, {})

    @classmethod
    def oscillatory_quadratic(cls, b, amplitude: float = 0.5) -> "Integrand":
        """a(y) |xi - b|^2 with a(y) = 1 + amplitude * mean_j cos(2 pi y_j)."""
        if abs(amplitude) >= 1:
            raise ValueError("|amplitude| must be below 1 to keep the coefficient positive")
        b = np.atleast_1d(np.asarray(b, float))
        return cls("oscillatory_quadratic", b.size, {"b": b, "amplitude": float(amplitude)})

    # ---------------------------------------------------------------- queries
    @property
    def y_dependent(self) -> bool:
        return self.kind in ("p_power", "oscillatory_quadratic") and self.params.get("amplitude", 0.0) != 0.0

    @property
    def convex(self) -> bool:
        return self.kind in ("quadratic", "p_power", "oscillatory_quadratic")

    @property
    def quadratic_form(self) -> bool:
        """True when f(y, .) is a quadratic polynomial (exact oracles apply)."""
        return self.kind in ("quadratic", "oscillatory_quadratic") or (
            self.kind == "p_power" and self.params["p"] == 2.0)

    def _coefficient(self, y) -> np.ndarray | float:
        amp = self.params.get("amplitude", 0.0)
        if amp == 0.0 or y is None:
            if amp != 0.0:
                raise ValueError("this integrand depends on y; pass cell coordinates")
            return 1.0
        y = np.asarray(y, float)
        return 1.0 + amp * np.mean(np.cos(2 * np.pi * y), axis=-1)

    def _check(self, xi):
        xi = np.asarray(xi, float)
        if xi.shape[-1] != self.n_comp:
            raise ValueError(f"integrand expects {self.n_comp} components, got {xi.shape[-1]}")
        return xi

    def value(self, xi, y=None) -> np.ndarray:
        xi = self._check(xi)
        k = self.kind
        if k == "quadratic":
            z = xi - self.params["b"]
            return np.einsum("...i,ij,...j->...", z, self.params["Q"], z) + self.params["c"]
        if k == "p_power":
            w = self.params["weight"] * self._coefficient(y)
            return w * np.linalg.norm(xi, axis=-1) ** self.params["p"]
        if k == "double_well":
            da = np.sum((xi - self.params["a"]) ** 2, axis=-1)
            db = np.sum((xi - self.params["b"]) ** 2, axis=-1)
            return self.params["stiffness"] * da * db
        if k == "neg_det":
            return -(xi[..., 0] * xi[..., 3] - xi[..., 1] * xi[..., 2])
        z = xi - self.params["b"]
        return self._coefficient(y) * np.sum(z * z, axis=-1)

    def grad(self, xi, y=None) -> np.ndarray:
        xi = self._check(xi)
        k = self.kind
        if k == "quadratic":
            return 2.0 * (xi - self.params["b"]) @ self.params["Q"]
        if k == "p_power":
            p = self.params["p"]
            w = self.params["weight"] * self._coefficient(y)
            r = np.linalg.norm(xi, axis=-1, keepdims=True)
            safe = np.where(r > 0, r, 1.0)
            return np.asarray(w)[..., None] * p * np.where(r > 0, safe ** (p - 2), 0.0) * xi \
                if np.ndim(w) else w * p * np.where(r > 0, safe ** (p - 2), 0.0) * xi
        if k == "double_well":
            za, zb = xi - self.params["a"], xi - self.params["b"]
            da = np.sum(za * za, axis=-1, keepdims=True)
            db = np.sum(zb * zb, axis=-1, keepdims=True)
            return 2.0 * self.params["stiffness"] * (db * za + da * zb)
        if k == "neg_det":
            return -np.stack([xi[..., 3], -xi[..., 2], -xi[..., 1], xi[..., 0]], axis=-1)
        coef = np.asarray(self._coefficient(y))
        return 2.0 * (coef[..., None] if coef.ndim else coef) * (xi - self.params["b"])

    # ----------------------------------------------------------------- growth
    def growth(self) -> GrowthParams:
        k = self.kind
        if k == "quadratic":
            Q, b, c = self.params["Q"], self.params["b"], self.params["c"]
            ev = np.linalg.eigvalsh(Q)
            qmin, qmax = float(ev.min()), float(ev.max())
            bb = float(b @ b)
            lam = qmin / 2.0
            a = max(2.0 * bb - (2.0 * c / qmin if qmin > 0 else 0.0), 1.0)
            Lam = max(2.0 * qmax, 2.0 * qmax * bb + c, 1e-300)
            return GrowthParams(2.0, a, lam, Lam, max(qmax * max(1.0, 2.0 * np.sqrt(bb)), 1e-300))
        if k == "oscillatory_quadratic":
            lo, hi = _weight_bounds(self.params["amplitude"])
            bb = float(self.params["b"] @ self.params["b"])
            return GrowthParams(2.0, max(2.0 * bb, 1.0), lo / 2.0, 2.0 * hi * max(1.0, bb),
                                hi * max(1.0, 2.0 * np.sqrt(bb)))
        if k == "p_power":
            lo, hi = _weight_bounds(self.params["amplitude"])
            w, p = self.params["weight"], self.params["p"]
            return GrowthParams(p, 1.0, w * lo, w * hi, p * w * hi)
        if k == "double_well":
            s = self.params["stiffness"]
            R = float(max(np.linalg.norm(self.params["a"]), np.linalg.norm(self.params["b"])))
            return GrowthParams(4.0, max(16.0 * R ** 4, 1.0), s / 16.0, s * max(8.0, 8.0 * R ** 4),
                                16.0 * s * max(1.0, R ** 3))
        return GrowthParams(2.0, 1.0, 0.0, 0.5, 1.0)  # neg_det: |det| <= |xi|^2 / 2

    def check_growth(self, num: int = 2000, seed: int = 0, dim: int = 2, scale: float = 3.0) -> bool:
        """Sample the growth sandwich and the Lipschitz-type bound."""
        rng = np.random.default_rng(seed)
        g = self.growth()
        xi = scale * rng.standard_normal((num, self.n_comp))
        eta = scale * rng.standard_normal((num, self.n_comp))
        y = rng.random((num, dim)) if self.y_dependent else None
        f_xi, f_eta = self.value(xi, y), self.value(eta, y)
        r_xi, r_eta = np.linalg.norm(xi, axis=1), np.linalg.norm(eta, axis=1)
        slack = 1e-9 * (1.0 + np.abs(f_xi))
        upper = np.all(f_xi <= g.Lam * (1 + r_xi ** g.p) + slack)
        lower = (not g.coercive) or np.all(f_xi >= g.lam * (-g.a + r_xi ** g.p) - slack)
        lip = np.abs(f_xi - f_eta) <= g.mu * (1 + r_xi ** (g.p - 1) + r_eta ** (g.p - 1)) \
            * np.linalg.norm(xi - eta, axis=1) + slack
        return bool(upper and lower and np.all(lip))

    # ---------------------------------------------------------- serialisation
    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        for key, val in self.params.items():
            out[key] = val.tolist() if isinstance(val, np.ndarray) else val
        if self.kind == "p_power":
            out["n_comp"] = self.n_comp
        return out

    @classmethod
    def from_dict(cls, spec: dict[str, Any]) -> "Integrand":
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == "quadratic":
            return cls.quadratic(spec["Q"], spec.get("b"), spec.get("c", 0.0))
        if kind == "squared_distance":
            return cls.squared_distance(spec["b"])
        if kind == "p_power":
            return cls.p_power(spec["p"], spec["n_comp"], spec.get("weight", 1.0), spec.get("amplitude", 0.0))
        if kind == "double_well":
            return cls.double_well(spec["a"], spec["b"], spec.get("stiffness", 1.0))
        if kind == "neg_det":
            return cls.neg_det()
        if kind == "oscillatory_quadratic":
            return cls.oscillatory_quadratic(spec["b"], spec.get("amplitude", 0.5))
        raise ValueError(f"unknown integrand kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SoftFamily:
    """The soft densities f_{0,eps} = f0 + eps * g (g optional)."""

    base: Integrand
    perturbation: Integrand | None = None

    @property
    def n_comp(self) -> int:
        return self.base.n_comp

    def value(self, xi, eps: float) -> np.ndarray:
        out = self.base.value(xi)
        if self.perturbation is not None:
            out = out + eps * self.perturbation.value(xi)
        return out

    def grad(self, xi, eps: float) -> np.ndarray:
        out = self.base.grad(xi)
        if self.perturbation is not None:
            out = out + eps * self.perturbation.grad(xi)
        return out

    @classmethod
    def of(cls, f) -> "SoftFamily":
        return f if isinstance(f, SoftFamily) else cls(f)
