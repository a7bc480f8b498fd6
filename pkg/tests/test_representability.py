import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic_embed.normed_spaces import lp_norm
from dyadic_embed.representability import (
    LinearMap,
    NotAnIsomorphismError,
    OracleError,
    check_map,
    diagonal_oracle,
    distortion,
    full_norm,
    identity_oracle,
    inverse_norm,
    operator_norm,
    parse_oracle,
    span_basis,
)


def full_map(matrix, p_in, p_out):
    matrix = np.asarray(matrix, float)
    return LinearMap(matrix, np.eye(matrix.shape[1]), p_in, p_out)


def vertex_norm(A, p_out):
    """Brute force ||A||_{1 -> q}: the l_1 unit ball is the hull of +-e_j."""
    d = A.shape[1]
    return max(lp_norm(A @ (s * np.eye(d)[j]), p_out) for j in range(d) for s in (1, -1))


def sign_norm(A, p_in):
    """Brute force ||A||_{p -> inf} by maximizing each row against the p-ball."""
    best = 0.0
    for row in A:
        # Holder's equality case for a single row functional, checked on sign vectors too
        for signs in itertools.product((1, -1), repeat=A.shape[1]):
            v = np.array(signs, float)
            best = max(best, abs(row @ v) / lp_norm(v, p_in))
    return best


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, math.inf])
def test_identity_has_norm_one(p):
    A = full_map(np.eye(3), p, p)
    assert operator_norm(A).value == 1.0 and operator_norm(A).exact


def test_diagonal_l2():
    A = full_map(np.diag([1.0, 0.5]), 2, 2)
    assert operator_norm(A).value == pytest.approx(1.0)
    assert inverse_norm(A).value == pytest.approx(2.0)
    assert distortion(A).value == pytest.approx(2.0) and distortion(A).exact


def test_column_norm_example():
    A = np.array([[1.0], [1.0]])
    assert vertex_norm(A, 1) == 2.0
    assert operator_norm(full_map(A, 1, 1)).value == 2.0


@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from([1.0, 2.0, 3.0, math.inf]), st.data())
@settings(max_examples=40, deadline=None)
def test_exact_formulas_match_brute_force(m, d, q, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 10**6)))
    A = rng.standard_normal((m, d))
    assert full_norm(A, 1, q) == pytest.approx(vertex_norm(A, q), rel=1e-12)
    assert full_norm(A, 2, 2) == pytest.approx(np.linalg.svd(A, compute_uv=False)[0], rel=1e-12)
    # (inf, inf) is max row l_1 norm, attained at a sign vector
    assert full_norm(A, math.inf, math.inf) == pytest.approx(sign_norm(A, math.inf), rel=1e-12)


@given(st.sampled_from([(1.0, 2.0), (2.0, math.inf), (3.0, 3.0), (1.5, 2.0), (2.0, 2.0)]), st.data())
@settings(max_examples=30, deadline=None)
def test_lower_bound_soundness(pair, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 10**6)))
    A = full_map(rng.standard_normal((3, 3)), *pair)
    res = operator_norm(A, samples=2000)
    for _ in range(300):
        u = rng.standard_normal(3)
        u /= lp_norm(u, pair[0])
        assert lp_norm(A.matrix @ u, pair[1]) <= res.bound + 1e-12
    if not res.exact:
        assert res.upper is None or res.value <= res.upper


def test_estimate_flag_for_hard_pairs():
    A = full_map(np.array([[1.0, 2.0], [3.0, -1.0]]), 3.0, 1.5)
    res = operator_norm(A, samples=2000)
    assert not res.exact and res.value > 0


def test_rank_deficient_rejected():
    A = LinearMap(np.array([[1.0, 1.0]]), np.eye(2), 2, 2)
    with pytest.raises(NotAnIsomorphismError):
        distortion(A)


@pytest.mark.parametrize("c", [0.1, 3.0, 1e4])
def test_distortion_scale_invariant(c):
    rng = np.random.default_rng(1)
    A = full_map(rng.standard_normal((3, 3)), 2, 2)
    assert distortion(A.scaled(c)).value == pytest.approx(distortion(A).value, rel=1e-10)


def test_identity_oracle_examples():
    oracle = identity_oracle()
    R = oracle(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float), 2, 2)
    assert R.matrix.shape == (2, 3)
    assert distortion(R).value == pytest.approx(1.0, abs=1e-12)
    R1 = oracle(np.array([[0.0, 0.0], [3.0, 4.0]]), 2, 2)
    assert R1.matrix.shape == (1, 2) and distortion(R1).value == pytest.approx(1.0)
    assert oracle(np.zeros((1, 3)), 2, 2) is None
    with pytest.raises(OracleError):
        oracle(np.eye(2), 1, 2)


def test_identity_oracle_copies_net_points():
    R = identity_oracle()(np.array([[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]]), 2, 2)
    g = np.array([1.0, 2.0])
    assert lp_norm(R(g), 2) == pytest.approx(lp_norm(g, 2))
    np.testing.assert_allclose(R.inverse(R(g)), g, atol=1e-14)


def test_random_span_identity_distortion():
    rng = np.random.default_rng(11)
    pts = np.vstack([np.zeros(4), rng.standard_normal((5, 4))])
    d = distortion(identity_oracle()(pts, 2, 2))
    assert d.exact and d.value <= 1 + 1e-9


def test_diagonal_oracle_examples():
    R = diagonal_oracle(2.0)(np.array([[0, 0], [1, 0], [0, 1]], float), 2, 2)
    d = distortion(R)
    assert 1 < d.value <= 2 * (1 + 1e-9)
    assert operator_norm(R).value <= 1 + 1e-12
    assert diagonal_oracle(1.0).name == "identity"


@pytest.mark.parametrize("p", [1.0, math.inf])
def test_oracles_non_euclidean_exact(p):
    pts = np.array([[0, 0, 0], [1, 2, 0], [0, 1, -1], [2, 0, 1]], float)
    for oracle in (identity_oracle(), diagonal_oracle(2.0)):
        R = oracle(pts, p, p)
        chk = check_map(R, oracle.C)
        assert chk.ok and chk.norm.exact and chk.inverse_norm.exact


@pytest.mark.parametrize("p", [1.0, 3.0, math.inf])
def test_oracles_on_proper_subspace(p):
    # a 2-dimensional span inside l_p^3: identity stays exactly isometric
    pts = np.array([[0, 0, 0], [1, 2, 0], [0, 1, 1]], float)
    R = identity_oracle()(pts, p, p)
    assert R.rank == 2
    chk = check_map(R, 1.0)
    assert chk.ok and chk.norm.value == pytest.approx(1.0)
    R2 = diagonal_oracle(2.0)(pts, p, p)
    chk2 = check_map(R2, 2.0)
    assert chk2.ok


def test_span_basis_drops_dependent_points():
    pts = np.array([[1.0, 0, 0], [2.0, 0, 0], [0, 1.0, 0], [1.0, 1.0 + 1e-13, 0]])
    B, ratio = span_basis(pts)
    assert B.shape == (3, 2) and ratio > 1e-10


def test_parse_oracle():
    assert parse_oracle("identity").C == 1.0
    assert parse_oracle("diagonal:2").C == 2.0
    for bad in ("diagonal:x", "nope", "diagonal:0.5"):
        with pytest.raises(OracleError):
            parse_oracle(bad)
