import numpy as np
import pytest

from afree_homog import catalog
from afree_homog.fields import Microstructure, PeriodicField
from afree_homog.highcontrast import (HighContrastProblem, energy_Feps, energy_parts, gamma_sweep, minimize_Feps,
                                      minimize_limit, richardson_limit)
from afree_homog.integrands import Integrand, SoftFamily
from oracles import feasible_basis

DIV2 = catalog.get("div:2")
BOX = Microstructure.box(8, 2, 0.25)
B = np.array([1.0, 0.0])
# dense weighted least squares over the A-free basis, m=2, s=8
FEPS_ORACLE_M2 = 0.043145602494880184


def problem(m=2, s=8, f0=None, f1=None, op=DIV2, ms=BOX, **opts):
    from afree_homog.solvers import SolveOptions
    return HighContrastProblem(op, f0 or Integrand.squared_distance([0.0, 0.0]), f1 or Integrand.squared_distance(B),
                               ms, m, s, SolveOptions(**opts))


def test_energy_of_zero_and_constant_fields():
    prob = problem()
    n = prob.n
    zero = PeriodicField.zeros(n, 2, 2)
    assert abs(energy_Feps(prob, zero) - (1 - BOX.volume_fraction)) <= 1e-14
    c = np.array([0.5, -2.0])
    const = PeriodicField.constant(n, 2, c)
    frac0 = prob.domain.chi0_eps.mean()
    expected = frac0 * prob.epsilon ** 2 * (c @ c) + (1 - frac0) * np.sum((c - B) ** 2)
    assert abs(energy_Feps(prob, const) - expected) <= 1e-13


def test_soft_term_scales_like_eps_power():
    # p-homogeneous soft density: soft part equals eps^p times the unscaled soft energy
    p = 3.0
    f0 = Integrand.p_power(p, 2)
    for m in (1, 2, 4):
        prob = problem(m=m, f0=f0)
        u = np.random.default_rng(m).normal(size=(prob.n, prob.n, 2))
        soft, _ = energy_parts(prob, u)
        raw = np.mean(prob.domain.chi0_eps * f0.value(u))
        assert abs(soft - prob.epsilon ** p * raw) <= 1e-12 * max(1.0, raw)


def test_soft_family_perturbation_enters_linearly():
    pert = Integrand.squared_distance([1.0, 1.0])
    base = Integrand.squared_distance([0.0, 0.0])
    fam = SoftFamily(base, pert)
    z = np.array([[0.3, 0.2]])
    assert np.allclose(fam.value(z, 0.25), base.value(z) + 0.25 * pert.value(z))


def test_field_shape_checked():
    with pytest.raises(ValueError, match="grid"):
        energy_Feps(problem(), np.zeros((8, 8, 2)))


def test_problem_validation():
    with pytest.raises(ValueError, match="multiple"):
        problem(s=12)
    with pytest.raises(ValueError, match="positive"):
        problem(m=0)
    with pytest.raises(ValueError, match="domain space"):
        problem(f1=Integrand.squared_distance([0.0, 0.0, 0.0]))


def test_minimize_feps_matches_oracle():
    rep = minimize_Feps(problem(), xi_star=B)
    assert abs(rep.value - FEPS_ORACLE_M2) <= 1e-8
    assert rep.residual_A <= 1e-8
    assert rep.converged
    assert abs(rep.info["soft_energy"] + rep.info["stiff_energy"] - rep.value) <= 1e-14


def test_minimize_feps_live_oracle_ball():
    ms = Microstructure.ball(4, 2, 0.3)
    prob = problem(m=2, s=4, ms=ms)
    n = prob.n
    chi0 = prob.domain.chi0_eps.astype(float).reshape(-1)
    w = np.repeat(chi0 * prob.epsilon ** 2 + (1 - chi0), 2)
    tgt = np.tile(B, n * n) * np.repeat(1 - chi0, 2)
    z = feasible_basis(DIV2, n, zero_mean=False)
    c = np.linalg.lstsq(z * np.sqrt(w)[:, None], tgt * np.sqrt(w), rcond=None)[0]
    oracle = np.sum(w * (z @ c - tgt) ** 2) / n ** 2
    assert abs(minimize_Feps(prob).value - oracle) <= 1e-8


def test_minimizer_beats_constant_competitor():
    prob = problem(m=4)
    rep = minimize_Feps(prob, xi_star=B)
    const = energy_Feps(prob, PeriodicField.constant(prob.n, 2, B))
    assert rep.value <= const + 1e-14
    assert rep.value < const - 1e-3


def test_zero_integrands_give_zero():
    z = Integrand.quadratic(np.zeros((2, 2)))
    rep = minimize_Feps(problem(f0=z, f1=z), xi_star=[1.0, 2.0])
    assert abs(rep.value) <= 1e-14


def test_preconditioner_does_not_change_value():
    a = minimize_Feps(problem(m=4, precondition=True), xi_star=B).value
    b = minimize_Feps(problem(m=4, precondition=False), xi_star=B).value
    assert abs(a - b) <= 1e-10


def test_minimize_limit_finds_well():
    res = minimize_limit(DIV2, Integrand.squared_distance(B), Integrand.squared_distance([0.0, 0.0]), BOX,
                         [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, 1.0]], 8)
    assert np.allclose(res.xi_star, B, atol=1e-5)
    assert abs(res.value) <= 1e-8
    assert res.alpha0 == 0.0
    assert len(res.grid_values) == 4
    with pytest.raises(ValueError, match="empty"):
        minimize_limit(DIV2, Integrand.squared_distance(B), Integrand.squared_distance([0, 0.0]), BOX,
                       np.zeros((0, 2)), 8)


def test_gamma_sweep_single_row_and_validation():
    rep = gamma_sweep(problem(), [2], [B])
    assert len(rep.rows) == 1
    row = rep.rows[0]
    assert abs(row.minFeps - FEPS_ORACLE_M2) <= 1e-8
    assert row.gap == abs(row.minFeps - rep.predicted)
    assert rep.richardson is None
    with pytest.raises(ValueError, match="empty"):
        gamma_sweep(problem(), [], [B])
    with pytest.raises(ValueError, match="ascending"):
        gamma_sweep(problem(), [4, 2], [B])


def test_gamma_sweep_gaps_shrink():
    rep = gamma_sweep(problem(), [2, 4, 8], [B])
    assert rep.monotone
    assert all(r.converged for r in rep.rows)
    assert rep.gaps[-1] < rep.gaps[0] / 4
    # gaps decay like eps^2 here, so the extrapolated value is far closer to the limit
    assert rep.richardson_gap < rep.gaps[-1] / 2


def test_richardson_limit():
    eps = [0.5, 0.25, 0.125]
    vals = [1.0 + 3 * e ** 2 for e in eps]
    lim, q = richardson_limit(eps, vals)
    assert abs(lim - 1.0) <= 1e-12 and abs(q - 2.0) <= 1e-12
    assert richardson_limit(eps[:2], vals[:2]) == (None, None)
