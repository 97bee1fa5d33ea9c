import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from jsum.errors import PreconditionError, UnconvergedError
from jsum.lp_space import (
    INF,
    BoundPair,
    Subspace,
    best_approximation,
    check_p,
    dist_to_subspace,
    dual_exponent,
    lp_direct_sum,
    lp_norm,
    operator_norm_bounds,
    vector_from_json,
    vector_to_json,
)

from conftest import P_VALUES, random_subspace_basis

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
p_strategy = st.one_of(st.sampled_from(P_VALUES), st.floats(1.0, 8.0))


def vectors(n):
    return arrays(np.float64, n, elements=finite)


# -- lp_norm ------------------------------------------------------------------


def test_lp_norm_examples():
    assert lp_norm([3, 4], 2) == pytest.approx(5.0, abs=1e-15)
    for p in P_VALUES:
        assert lp_norm([1, 0, 0], p) == 1.0
    assert lp_norm([1, 1, 1], 3) == pytest.approx(3 ** (1 / 3), rel=1e-15)


def test_lp_norm_extremes_do_not_overflow():
    assert lp_norm([1e300, 1e300], 2) == pytest.approx(math.sqrt(2) * 1e300, rel=1e-14)
    assert lp_norm([1e-300, 0.0], 3) == pytest.approx(1e-300, rel=1e-14)
    assert lp_norm([], 2) == 0.0


@pytest.mark.parametrize("p", [0.5, -1, float("nan"), "abc", None])
def test_invalid_exponent(p):
    with pytest.raises(PreconditionError):
        lp_norm([1.0], p)


def test_check_p_accepts_inf_strings():
    assert check_p("inf") == INF
    assert check_p("1.5") == 1.5


def test_non_finite_entries_rejected():
    with pytest.raises(PreconditionError):
        lp_norm([1.0, float("inf")], 2)


@given(vectors(5), st.floats(-100, 100), p_strategy)
def test_lp_norm_homogeneous(v, t, p):
    assert lp_norm(t * v, p) == pytest.approx(abs(t) * lp_norm(v, p), rel=1e-12, abs=1e-12)


@given(vectors(5), vectors(5), p_strategy)
def test_lp_norm_triangle(v, w, p):
    scale = lp_norm(v, p) + lp_norm(w, p)
    assert lp_norm(v + w, p) <= scale + 1e-12 * max(scale, 1.0)


@given(vectors(6), st.floats(1.0, 6.0), st.floats(1.0, 6.0))
def test_lp_norm_nonincreasing_in_p(v, p, q):
    lo, hi = sorted((p, q))
    assert lp_norm(v, hi) <= lp_norm(v, lo) * (1 + 1e-12) + 1e-300
    assert lp_norm(v, INF) <= lp_norm(v, hi) * (1 + 1e-12) + 1e-300


@given(vectors(6), vectors(6), p_strategy)
def test_holder(v, w, p):
    q = dual_exponent(p)
    rhs = lp_norm(v, p) * lp_norm(w, q)
    assert abs(float(v @ w)) <= rhs * (1 + 1e-12) + 1e-9


def test_dual_exponent_examples():
    assert dual_exponent(2) == 2
    assert dual_exponent(1) == INF
    assert dual_exponent(INF) == 1
    assert dual_exponent(4) == pytest.approx(4 / 3, rel=1e-15)


@given(st.floats(1.0, 50.0))
def test_dual_exponent_involution(p):
    assert dual_exponent(dual_exponent(p)) == pytest.approx(p, rel=1e-9)


def test_lp_direct_sum_examples():
    assert lp_direct_sum([1, 1], 2) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert lp_direct_sum([2.5], 3) == 2.5
    assert lp_direct_sum([1, 2, 2], 1) == 5
    with pytest.raises(PreconditionError):
        lp_direct_sum([1, -1], 2)


# -- subspaces ----------------------------------------------------------------


def test_subspace_rejects_dependent_basis():
    with pytest.raises(PreconditionError):
        Subspace([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
    with pytest.raises(PreconditionError):
        Subspace(np.zeros((0, 3)))


def test_subspace_json_round_trip(rng):
    V = Subspace(random_subspace_basis(rng, 2, 5))
    W = Subspace.from_json(V.to_json())
    assert np.array_equal(V.basis, W.basis)
    assert V.to_json()["ambient_dim"] == 5
    v = rng.normal(size=4)
    assert np.array_equal(vector_from_json(vector_to_json(v)), v)


def test_subspace_basis_is_read_only():
    V = Subspace.coordinate([0, 2], 4)
    with pytest.raises(ValueError):
        V.basis[0, 0] = 5.0
    assert V.dim == 2 and V.ambient_dim == 4


# -- distance to a subspace ---------------------------------------------------


def test_dist_examples():
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    V = Subspace([e1 + e2])
    for p in P_VALUES:
        assert dist_to_subspace(2 * e1 + 2 * e2, V, p) == pytest.approx(0.0, abs=1e-9)
    assert dist_to_subspace(e1, Subspace([e2]), 2) == pytest.approx(1.0, abs=1e-15)
    # e1 + e2 is orthogonal to e1 - e2, so the residual is the whole vector
    v = np.array([1.0, 1.0])
    assert dist_to_subspace(v, Subspace([[1.0, -1.0]]), 2) == pytest.approx(1.4142135623730951, rel=1e-14)


def normal_equations_distance(v, B):
    # B has the basis as rows
    c = np.linalg.solve(B @ B.T, B @ v)
    return float(np.sqrt(np.sum((v - B.T @ c) ** 2)))


def test_dist_p2_matches_normal_equations(rng):
    for _ in range(100):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, n))
        B = random_subspace_basis(rng, k, n)
        v = rng.normal(size=n)
        got = dist_to_subspace(v, Subspace(B), 2)
        assert got == pytest.approx(normal_equations_distance(v, B), rel=1e-8, abs=1e-10)


def coordinate_grid_distance(v, b, p):
    # one-dimensional V: minimize ||v - t b|| over a fine grid, then refine
    ts = np.linspace(-5, 5, 20001)
    vals = [lp_norm(v - t * b, p) for t in ts]
    i = int(np.argmin(vals))
    fine = np.linspace(ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)], 2001)
    return min(lp_norm(v - t * b, p) for t in fine)


@pytest.mark.parametrize("p", [1.0, 1.5, 3.0, INF])
def test_dist_one_dimensional_against_grid(p):
    rng = np.random.default_rng(3)
    for _ in range(3):
        v, b = rng.normal(size=4), rng.normal(size=4)
        got = dist_to_subspace(v, Subspace([b]), p)
        ref = coordinate_grid_distance(v, b, p)
        assert got <= ref + 1e-9
        assert got >= ref - 1e-5


@given(st.integers(0, 10_000), p_strategy)
def test_dist_at_most_norm_and_witnessed(seed, p):
    rng = np.random.default_rng(seed)
    B = random_subspace_basis(rng, 2, 5)
    v = rng.normal(size=5)
    dist, coeffs = best_approximation(v, Subspace(B), p)
    assert dist <= lp_norm(v, p) + 1e-12
    # the reported distance is attained by the reported coefficients
    assert lp_norm(v - B.T @ coeffs, p) == pytest.approx(dist, rel=1e-12, abs=1e-12)


def test_dist_dimension_mismatch():
    with pytest.raises(PreconditionError):
        dist_to_subspace([1.0, 2.0], Subspace([[1.0, 0.0, 0.0]]), 2)


def test_dist_unconverged_carries_best():
    rng = np.random.default_rng(0)
    V = Subspace(random_subspace_basis(rng, 3, 8))
    with pytest.raises(UnconvergedError) as info:
        dist_to_subspace(rng.normal(size=8), V, 7.5, max_iter=1)
    assert info.value.best is not None
    assert info.value.code == "unconverged"


# -- operator norms -----------------------------------------------------------


def test_operator_norm_examples():
    for p in P_VALUES:
        b = operator_norm_bounds(np.eye(3), p)
        assert b.lower == pytest.approx(1.0, abs=1e-12) and b.upper == pytest.approx(1.0, abs=1e-12)
    A = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert operator_norm_bounds(A, 1).upper == 1.0
    assert operator_norm_bounds(A, INF).upper == 2.0
    b = operator_norm_bounds(A, 2)
    assert b.upper == pytest.approx(1.4142135623730951, rel=1e-12)
    assert b.lower == pytest.approx(1.4142135623730951, rel=1e-12)


def test_operator_norm_p2_matches_spectral_oracle(rng):
    for _ in range(50):
        A = rng.normal(size=(int(rng.integers(1, 6)), int(rng.integers(1, 6))))
        ref = math.sqrt(np.linalg.eigvalsh(A.T @ A).max())
        b = operator_norm_bounds(A, 2)
        assert b.upper == pytest.approx(ref, rel=1e-10)
        assert b.lower == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("p", [1.0, 1.3, 2.0, 3.0, INF])
def test_operator_norm_bounds_bracket_sampled_ratios(p, rng):
    A = rng.normal(size=(4, 3))
    b = operator_norm_bounds(A, p)
    assert b.lower <= b.upper + 1e-12
    X = rng.normal(size=(3, 2000))
    sampled = max(lp_norm(A @ x, p) / lp_norm(x, p) for x in X.T)
    assert sampled <= b.upper + 1e-12
    assert b.lower >= sampled - 1e-9  # the ascent beats random sampling
    if b.witness is not None:
        x = np.asarray(b.witness)
        assert lp_norm(A @ x, p) / lp_norm(x, p) == pytest.approx(b.lower, rel=1e-9)


def test_bound_pair_validates_order():
    with pytest.raises(PreconditionError):
        BoundPair(2.0, 1.0, True, True)
    assert BoundPair(1.0, 1.0, True, True).to_json()["upper"] == 1.0
