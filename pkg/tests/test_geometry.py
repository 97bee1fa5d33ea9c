import itertools
import math

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from jsum.errors import PreconditionError
from jsum.geometry import (
    ApproximabilityProfile,
    SubspacePair,
    bm_distance_to_l2,
    f_approximability_check,
    graph_shadow,
    inclination,
    min_extension_norm,
    rosenthal_like_subspaces,
    uniform_approximability_report,
)
from jsum.lp_space import INF, Subspace, dist_to_subspace, lp_norm, operator_norm_bounds

from conftest import random_subspace_basis

ALL_P = (1.0, 1.5, 2.0, 3.0, 4.0, INF)


def sin_smallest_angle(U, V):
    return float(np.sin(np.min(subspace_angles(U.matrix, V.matrix))))


def random_pair(rng, n=8, max_k=3, max_l=5):
    k = int(rng.integers(1, max_k + 1))
    l = int(rng.integers(1, max_l + 1))
    return Subspace(random_subspace_basis(rng, k, n)), Subspace(random_subspace_basis(rng, l, n))


def nested_pair(rng, n, k, l):
    V = Subspace(random_subspace_basis(rng, l, n))
    U = Subspace(random_subspace_basis(rng, k, l) @ V.basis)
    return U, V


# -- inclination --------------------------------------------------------------


def test_inclination_examples():
    e = np.eye(2)
    assert inclination(Subspace([e[0]]), Subspace([e[1]]), 2).upper == pytest.approx(1.0, abs=1e-15)
    U, V = Subspace([[1.0, 1.0]]), Subspace([e[0]])
    assert inclination(U, V, 2).upper == pytest.approx(1 / math.sqrt(2), rel=1e-12)
    # u = (1, 1)/||(1, 1)||_p and the nearest point of span(e_1) is u_1 e_1,
    # so delta = 2^(-1/p) for p < inf, with the p = 1 infimum also attained there
    assert inclination(U, V, 1).upper == pytest.approx(0.5, abs=1e-9)
    assert inclination(U, V, INF).upper == pytest.approx(1.0, abs=1e-9)
    assert inclination(U, V, 1.5).upper == pytest.approx(2 ** (-2 / 3), rel=1e-7)
    assert inclination(U, V, 4).upper == pytest.approx(2 ** (-1 / 4), rel=1e-7)


@pytest.mark.parametrize("p", ALL_P)
def test_inclination_zero_for_nested(p):
    rng = np.random.default_rng(1)
    for _ in range(3):
        U, V = nested_pair(rng, 6, 2, 4)
        b = inclination(U, V, p)
        assert b.lower >= 0.0
        assert b.upper <= 1e-9


@pytest.mark.parametrize("p", ALL_P)
def test_inclination_at_most_one_with_valid_witness(p):
    rng = np.random.default_rng(2)
    for _ in range(4):
        U, V = random_pair(rng, n=6, max_k=2, max_l=3)
        b = inclination(U, V, p)
        assert 0.0 <= b.lower <= b.upper <= 1.0 + 1e-12
        u, v = b.witness
        assert lp_norm(u, p) == pytest.approx(1.0, rel=1e-12)
        assert dist_to_subspace(u, U, 2) <= 1e-9  # u lies in U
        assert dist_to_subspace(v, V, 2) <= 1e-9 * max(1.0, lp_norm(v, 2))
        assert lp_norm(u - v, p) == pytest.approx(b.upper, rel=1e-12, abs=1e-15)


def test_inclination_p2_matches_principal_angles():
    rng = np.random.default_rng(3)
    for _ in range(100):
        U, V = random_pair(rng)
        b = inclination(U, V, 2)
        ref = sin_smallest_angle(U, V)
        assert b.upper == pytest.approx(ref, abs=1e-8)
        assert b.lower == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("p", [1.0, 2.0, INF])
def test_exact_inclination_is_basis_invariant(p):
    rng = np.random.default_rng(4)
    for _ in range(5):
        U, V = random_pair(rng, n=6, max_k=2, max_l=3)
        ref = inclination(U, V, p).upper
        S = random_subspace_basis(rng, U.dim, U.dim)
        T = random_subspace_basis(rng, V.dim, V.dim)
        U2, V2 = Subspace(3.7 * (S @ U.basis)), Subspace(T @ V.basis)
        assert inclination(U2, V2, p).upper == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_one_dimensional_inclination_is_a_distance(p):
    # with dim U = 1 the problem is convex: delta = dist(u, V) for the unit u
    rng = np.random.default_rng(5)
    for _ in range(5):
        u = rng.normal(size=5)
        V = Subspace(random_subspace_basis(rng, 2, 5))
        ref = dist_to_subspace(u / lp_norm(u, p), V, p)
        b = inclination(Subspace([u]), V, p)
        assert b.upper == pytest.approx(ref, rel=1e-7, abs=1e-10)
        assert inclination(Subspace([-2.5 * u]), V, p).upper == pytest.approx(ref, rel=1e-7, abs=1e-10)


def test_inclination_nonsmooth_p_matches_brute_force():
    # dim U = 2: scan the unit circle of U for p = 3 and compare
    rng = np.random.default_rng(6)
    U = Subspace(random_subspace_basis(rng, 2, 4))
    V = Subspace(random_subspace_basis(rng, 1, 4))
    p = 3.0
    scan = min(
        dist_to_subspace(s / lp_norm(s, p), V, p)
        for s in (np.cos(t) * U.basis[0] + np.sin(t) * U.basis[1] for t in np.linspace(0, np.pi, 721))
    )
    b = inclination(U, V, p)
    assert b.upper <= scan + 1e-9
    assert b.upper >= scan - 1e-4


def test_inclination_dimension_mismatch():
    with pytest.raises(PreconditionError):
        inclination(Subspace([[1.0, 0.0]]), Subspace([[1.0, 0.0, 0.0]]), 2)


# -- subspace pairs -----------------------------------------------------------


def test_pair_requires_inclusion():
    with pytest.raises(PreconditionError):
        SubspacePair(Subspace([[0.0, 0.0, 1.0]]), Subspace.coordinate([0, 1], 3), 2)
    pair = SubspacePair(Subspace([[1.0, 1.0, 0.0]]), Subspace.coordinate([0, 1], 3), 3)
    back = SubspacePair.from_json(pair.to_json())
    assert back.p == 3 and np.array_equal(back.inner.basis, pair.inner.basis)


# -- minimal extensions -------------------------------------------------------


def check_witness(pair, b):
    u = np.asarray(b.witness)
    # fixes inner, maps into outer, and carries the reported upper bound
    assert np.max(np.abs(u @ pair.inner.matrix - pair.inner.matrix)) <= 1e-9
    for col in u.T:
        assert dist_to_subspace(col, pair.outer, 2) <= 1e-9 * max(1.0, lp_norm(col, 2))
    assert operator_norm_bounds(u, pair.p).upper == pytest.approx(b.upper, rel=1e-12)


@pytest.mark.parametrize("p", [1.0, 1.2, 1.5, 2.0, 3.0, INF])
def test_coordinate_pairs_have_norm_one(p):
    n = 6
    for i in range(1, n):
        pair = SubspacePair(Subspace.coordinate(range(i), n), Subspace.coordinate(range(i + 1), n), p)
        b = min_extension_norm(pair)
        assert b.lower == pytest.approx(1.0, abs=1e-9)
        assert b.upper == pytest.approx(1.0, abs=1e-9)
        check_witness(pair, b)


def test_p2_pairs_have_norm_one():
    rng = np.random.default_rng(7)
    for _ in range(10):
        U, V = nested_pair(rng, 6, int(rng.integers(1, 3)), 3)
        pair = SubspacePair(U, V, 2)
        b = min_extension_norm(pair)
        assert b.lower == pytest.approx(1.0, abs=1e-9) and b.upper == pytest.approx(1.0, abs=1e-9)
        check_witness(pair, b)


@pytest.mark.parametrize("p", [1.0, 1.5, 3.0, INF])
def test_extension_bounds_and_witness(p):
    rng = np.random.default_rng(8)
    for _ in range(3):
        U, V = nested_pair(rng, 5, 1, 3)
        pair = SubspacePair(U, V, p)
        b = min_extension_norm(pair)
        assert b.lower >= 1.0 - 1e-12
        assert b.lower <= b.upper
        check_witness(pair, b)
        if p in (1.0, INF):
            assert b.certified_lower and b.lower == pytest.approx(b.upper, rel=1e-8)


@pytest.mark.parametrize("p", [1.0, 3.0, INF])
def test_extension_nonincreasing_when_outer_grows(p):
    rng = np.random.default_rng(9)
    for _ in range(3):
        U, V = nested_pair(rng, 5, 1, 2)
        V2 = Subspace(np.vstack([V.basis, rng.normal(size=5)]))
        small = min_extension_norm(SubspacePair(U, V, p), relaxation=False).upper
        big = min_extension_norm(SubspacePair(U, V2, p), relaxation=False).upper
        assert big <= small + 1e-9


def interpolation_bound(u, p):
    a = np.abs(u)
    col = a.sum(axis=-2).max(axis=-1)
    row = a.sum(axis=-1).max(axis=-1)
    return col ** (1 / p) * row ** (1 - 1 / p)


def test_two_in_three_pair_against_grid():
    p = 4.0
    b1, b2 = np.array([1.0, 0.5, -0.3]), np.array([0.2, 1.0, 0.7])
    g = np.array([1.0, 2.0])
    Bo = np.column_stack([b1, b2])
    b_in = Bo @ g
    pair = SubspacePair(Subspace([b_in]), Subspace([b1, b2]), p)
    got = min_extension_norm(pair)

    # u = Bo C with C b_in = g; the free entries are the first two columns of C
    def operators(c11, c12, c21, c22):
        c13 = (g[0] - c11 * b_in[0] - c12 * b_in[1]) / b_in[2]
        c23 = (g[1] - c21 * b_in[0] - c22 * b_in[1]) / b_in[2]
        C = np.stack([np.stack([c11, c12, c13], -1), np.stack([c21, c22, c23], -1)], -2)
        return np.einsum("ia,...aj->...ij", Bo, C)

    axis = np.linspace(-1.5, 1.5, 31)
    grid = np.meshgrid(axis, axis, axis, axis, indexing="ij")
    values = interpolation_bound(operators(*grid), p)
    best = np.unravel_index(np.argmin(values), values.shape)
    grid_min = float(values[best])
    assert got.upper <= grid_min + 1e-9

    # the witness in grid coordinates, and a fine local grid around it
    C = np.linalg.lstsq(Bo, np.asarray(got.witness), rcond=None)[0]
    z = np.array([C[0, 0], C[0, 1], C[1, 0], C[1, 1]])
    assert float(interpolation_bound(operators(*z), p)) == pytest.approx(got.upper, rel=1e-9)
    local = np.linspace(-0.05, 0.05, 21)
    fine = np.meshgrid(*(zi + local for zi in z), indexing="ij")
    assert got.upper <= float(interpolation_bound(operators(*fine), p).min()) + 1e-9
    assert 1.0 <= got.lower <= got.upper
    check_witness(pair, got)


# -- approximability reports --------------------------------------------------


def coordinate_pairs(p, n_max=8):
    n = n_max + 1
    return [SubspacePair(Subspace.coordinate(range(i), n), Subspace.coordinate(range(i + 1), n), p)
            for i in range(1, n_max + 1)]


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_uniform_report_for_coordinate_pairs(p):
    rep = uniform_approximability_report(coordinate_pairs(p))
    assert rep.sup_upper <= 1 + 1e-9
    assert rep.uniform
    assert len(rep.rows()) == 8


def test_uniform_report_at_p2():
    rng = np.random.default_rng(10)
    pairs = [SubspacePair(*nested_pair(rng, 5, 1, 2), 2) for _ in range(4)]
    rep = uniform_approximability_report(pairs, lam=1.0 + 1e-12)
    assert rep.uniform and rep.sup_upper == pytest.approx(1.0, abs=1e-12)


def test_uniform_report_for_w_family():
    Ws = rosenthal_like_subspaces(3, 12, 1.5, seed=0)
    rep = uniform_approximability_report([SubspacePair(W, W, 1.5) for W in Ws])
    assert isinstance(rep.lower_nondecreasing, bool)
    assert rep.lower_slope is not None
    assert all(1.0 - 1e-12 <= b.lower <= b.upper for b in rep.bounds)


def test_f_approximability_profiles():
    pairs = coordinate_pairs(1.5, 4)
    bounds = [min_extension_norm(pr) for pr in pairs]
    for lam in (1.0 + 1e-9, 0.5):
        flat = f_approximability_check(pairs, ApproximabilityProfile((1.0,) * 4), constant=lam, bounds=bounds)
        uni = uniform_approximability_report(pairs, lam=lam, bounds=bounds)
        assert flat.f_approximable == uni.uniform
    selfp = f_approximability_check(pairs, [b.upper for b in bounds], bounds=bounds)
    assert selfp.constant == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(PreconditionError):
        f_approximability_check(pairs, [1.0, 1.0], bounds=bounds)
    with pytest.raises(PreconditionError):
        ApproximabilityProfile((1.0, 0.0))


def test_graph_shadow_profile_at_p2():
    Ws = rosenthal_like_subspaces(3, 12, 2.0, seed=1)
    H, Y = graph_shadow(Ws)
    assert H.ambient_dim == 12 + 6 and H.dim == 6
    deltas = [inclination(Yi, H, 2).upper for Yi in Y]
    for Yi, d in zip(Y, deltas):
        assert d == pytest.approx(sin_smallest_angle(Yi, H), abs=1e-10)
        # T is an isometry on sum W_i, so dist((w, 0), H)^2 = min ||w - w'||^2 + ||w'||^2 = 1/2
        assert d == pytest.approx(1 / math.sqrt(2), abs=1e-10)
    pairs = [SubspacePair(Yi, Yi, 2) for Yi in Y]
    rep = f_approximability_check(pairs, [1.0 / d for d in deltas])
    assert rep.ratios == pytest.approx(deltas, rel=1e-9)
    assert rep.f_approximable


# -- Banach-Mazur distance and test families ----------------------------------


def test_bm_examples():
    rng = np.random.default_rng(12)
    E = Subspace(random_subspace_basis(rng, 3, 6))
    b = bm_distance_to_l2(E, 2)
    assert b.lower == 1.0 and b.upper == pytest.approx(1.0, abs=1e-12)
    for p in ALL_P:
        assert bm_distance_to_l2(Subspace.coordinate([0], 5), p).upper == pytest.approx(1.0, abs=1e-12)
    # Q has entries +-1/sqrt 2 on two coordinates: the n^(1/2 - 1/4) = sqrt 2 comparison
    # beats the interpolation estimate 2^(1/4) * sqrt 2, and ||T^-1|| <= 1
    E = Subspace([[1.0, 1.0, 0.0, 0.0], [1.0, -1.0, 0.0, 0.0]])
    b = bm_distance_to_l2(E, 4)
    assert b.upper == pytest.approx(math.sqrt(2), rel=1e-12)
    assert b.upper >= 2 ** 0.25  # true distance of l_4^2 to l_2^2


def test_rosenthal_family():
    Ws = rosenthal_like_subspaces(4, 30, 1.5, seed=3)
    assert [W.dim for W in Ws] == [1, 2, 3, 4]
    assert lp_norm(Ws[0].basis[0], 1.5) == pytest.approx(1.0, rel=1e-14)
    for A, B in itertools.combinations(Ws, 2):
        assert np.all(A.basis @ B.basis.T == 0.0)
    again = rosenthal_like_subspaces(4, 30, 1.5, seed=3)
    assert all(np.array_equal(a.basis, b.basis) for a, b in zip(Ws, again))
    with pytest.raises(PreconditionError):
        rosenthal_like_subspaces(4, 9, 1.5)
