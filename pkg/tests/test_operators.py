import numpy as np
import pytest

from afree_homog import catalog
from afree_homog.operators import (DifferentialOperator, check_potential_pair, eval_symbol, kernel_projection,
                                   multi_indices, pseudoinverse, rank_at, verify_constant_rank)

ALL_NAMES = ["grad:2", "grad:3", "grad:2:2", "gradk:2:2", "gradk:3:2", "curl", "curl:2", "rowcurl:2",
             "rowcurl:3", "div:2", "div:3", "curlcurl", "inc", "symgrad:2", "symgrad:3", "divantisym:3"]


def test_multi_indices_graded_and_complete():
    idx = multi_indices(3, 2)
    assert len(idx) == 6
    assert all(sum(i) == 2 for i in idx)
    assert idx[0] == (2, 0, 0)


@pytest.mark.parametrize("name", ALL_NAMES)
def test_catalog_rank_matches_declared(name):
    op = catalog.get(name)
    cert = verify_constant_rank(op)
    assert cert.ok
    assert cert.rank == op.declared_rank


def test_curl_symbol_is_cross_product():
    op = catalog.get("curl")
    w = np.array([0.3, -1.2, 2.0])
    v = np.array([1.0, 0.5, -0.25])
    assert np.allclose(op.symbol(w) @ v, np.cross(w, v))


def test_curlcurl_symbol_closed_form():
    op = catalog.get("curlcurl")
    w = np.array([0.4, -0.7, 1.1])
    assert np.allclose(op.symbol(w), np.outer(w, w) - (w @ w) * np.eye(3))


def test_eval_symbol_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        eval_symbol(catalog.get("curl"), [1.0, 0.0])


def test_zero_operator_rejected():
    with pytest.raises(ValueError, match="nonzero"):
        DifferentialOperator(2, 1, 1, 1, {(1, 0): [[0.0]], (0, 1): [[0.0]]})


def test_wrong_degree_rejected():
    with pytest.raises(ValueError, match="degree"):
        DifferentialOperator(2, 2, 1, 1, {(1, 0): [[1.0]]})


def test_rank_violation_witnesses():
    # d_1 on scalars in 2-D: symbol w_1 vanishes on the w_2 axis
    op = DifferentialOperator(2, 1, 1, 1, {(1, 0): [[1.0]]})
    cert = verify_constant_rank(op)
    assert cert.status == "violation"
    (w1, r1), (w2, r2) = cert.witnesses
    assert np.allclose(w1, [1, 0]) and r1 == 1
    assert np.allclose(w2, [0, 1]) and r2 == 0


def test_too_few_samples():
    with pytest.raises(ValueError, match="samples"):
        verify_constant_rank(catalog.get("div:2"), num_samples=3)


def test_rank_is_deterministic_under_seed():
    a = verify_constant_rank(catalog.get("symgrad:3"), seed=4)
    b = verify_constant_rank(catalog.get("symgrad:3"), seed=4)
    assert a == b


def test_pseudoinverse_penrose_identities():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 5))
    p = pseudoinverse(a)
    assert np.allclose(a @ p @ a, a)
    assert np.allclose(p @ a @ p, p)
    assert np.allclose((a @ p).T, a @ p)
    assert np.allclose((p @ a).T, p @ a)
    assert np.allclose(p, np.linalg.pinv(a))


@pytest.mark.parametrize("name", ["curl", "div:3", "symgrad:2", "curlcurl", "gradk:2:2", "inc"])
def test_kernel_projection_properties(name):
    op = catalog.get(name)
    w = np.array([0.3, -0.8, 1.3][: op.dim])
    p = kernel_projection(op, w)
    assert np.allclose(p @ p, p, atol=1e-12)
    assert np.allclose(p, p.T, atol=1e-12)
    assert np.allclose(op.symbol(w) @ p, 0.0, atol=1e-12)
    assert round(np.trace(p)) == op.in_dim - op.declared_rank


def test_kernel_projection_scale_invariant():
    op = catalog.get("curl")
    w = np.array([1.0, 2.0, -0.5])
    assert np.allclose(kernel_projection(op, w), kernel_projection(op, 7.5 * w))


def test_kernel_projection_zero_frequency():
    with pytest.raises(ValueError, match="nonzero"):
        kernel_projection(catalog.get("curl"), [0.0, 0.0, 0.0])


@pytest.mark.parametrize("a,b", [("curl", "grad:3"), ("curl:2", "grad:2"), ("div:3", "divantisym:3"),
                                 ("div:2", "divantisym:2"), ("curlcurl", "grad:3"), ("inc", "symgrad:3"),
                                 ("rowcurl:2", "grad:2:2")])
def test_potential_pairs(a, b):
    assert check_potential_pair(catalog.get(a), catalog.get(b)).compatible


def test_incompatible_pair_detected():
    chk = check_potential_pair(catalog.get("curlcurl"), catalog.get("curl"))
    assert not chk.compatible


def test_pair_shape_mismatch():
    with pytest.raises(ValueError, match="chain"):
        check_potential_pair(catalog.get("curlcurl"), catalog.get("symgrad:3"))


def test_catalog_partner_and_names():
    for name in ["curl", "curl:2", "div:3", "curlcurl", "inc", "rowcurl:3"]:
        op = catalog.get(name)
        assert check_potential_pair(op, catalog.partner(op)).compatible
    assert catalog.partner(catalog.get("symgrad:3")) is None
    for bad in ["nope", "curl:2:2:2", "gradk"]:
        with pytest.raises(ValueError):
            catalog.get(bad)


def test_mandel_roundtrip():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((3, 3))
    m = m + m.T
    v = catalog.mandel(m)
    assert np.isclose(np.linalg.norm(v), np.linalg.norm(m))
    assert np.allclose(catalog.unmandel(v, 3), m)


def test_rank_at():
    assert rank_at(catalog.get("curlcurl"), [1.0, 2.0, 3.0]) == 2
