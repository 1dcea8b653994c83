import numpy as np
import pytest

from afree_homog.integrands import Integrand, SoftFamily

CATALOG = [
    Integrand.quadratic(np.diag([1.0, 3.0]), [0.5, -1.0], 0.2),
    Integrand.squared_distance([1.0, 0.0]),
    Integrand.p_power(3.0, 2),
    Integrand.p_power(2.5, 3, weight=2.0, amplitude=0.4),
    Integrand.double_well([1.0, 0.0], [-1.0, 0.5], stiffness=2.0),
    Integrand.oscillatory_quadratic([0.3, -0.2], amplitude=0.6),
    Integrand.neg_det(),
]


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: f.kind)
def test_growth_sandwich(f):
    assert f.check_growth(num=4000, seed=1)
    if f.kind == "neg_det":
        assert not f.growth().coercive


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: f.kind)
def test_gradient_matches_finite_differences(f):
    rng = np.random.default_rng(0)
    xi = rng.standard_normal((20, f.n_comp))
    y = rng.random((20, 2)) if f.y_dependent else None
    g = f.grad(xi, y)
    h = 1e-6
    fd = np.empty_like(g)
    for j in range(f.n_comp):
        e = np.zeros(f.n_comp)
        e[j] = h
        fd[:, j] = (f.value(xi + e, y) - f.value(xi - e, y)) / (2 * h)
    assert np.max(np.abs(g - fd) / (1 + np.abs(g))) <= 1e-6


def test_values():
    assert Integrand.squared_distance([1.0, 0.0]).value(np.array([1.0, 2.0])) == pytest.approx(4.0)
    assert Integrand.neg_det().value(np.array([1.0, 0, 0, 1.0])) == -1.0
    dw = Integrand.double_well([1.0], [-1.0])
    assert dw.value(np.array([0.0])) == pytest.approx(1.0)
    osc = Integrand.oscillatory_quadratic([0.0], amplitude=0.5)
    assert osc.value(np.array([1.0]), np.array([0.0])) == pytest.approx(1.5)


def test_validation():
    with pytest.raises(ValueError):
        Integrand.quadratic(-np.eye(2))
    with pytest.raises(ValueError):
        Integrand.p_power(1.0, 2)
    with pytest.raises(ValueError):
        Integrand.oscillatory_quadratic([0.0], amplitude=1.0)
    with pytest.raises(ValueError, match="components"):
        Integrand.squared_distance([0.0, 0.0]).value(np.zeros(3))
    with pytest.raises(ValueError, match="depends on y"):
        Integrand.oscillatory_quadratic([0.0]).value(np.zeros(1))


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: f.kind)
def test_dict_roundtrip(f):
    g = Integrand.from_dict(f.to_dict())
    rng = np.random.default_rng(2)
    xi = rng.standard_normal((5, f.n_comp))
    y = rng.random((5, 2)) if f.y_dependent else None
    assert np.allclose(f.value(xi, y), g.value(xi, y))


def test_soft_family():
    base = Integrand.squared_distance([0.0, 0.0])
    fam = SoftFamily(base, Integrand.squared_distance([1.0, 0.0]))
    xi = np.array([0.5, 0.5])
    assert fam.value(xi, 0.1) == pytest.approx(0.5 + 0.1 * 0.5)
    assert fam.value(xi, 0.0) == pytest.approx(base.value(xi))
    assert SoftFamily.of(base).value(xi, 0.3) == pytest.approx(base.value(xi))
