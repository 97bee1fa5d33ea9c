"""Inclination, minimal-norm extensions and approximability of subspace pairs in l_p^n."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, minimize
from scipy.stats import qmc

from .errors import PreconditionError
from .lp_space import (
    INF,
    BoundPair,
    Subspace,
    _duality_map,
    best_approximation,
    check_p,
    lp_norm,
    operator_norm_bounds,
)

logger = logging.getLogger(__name__)

SOBOL_STARTS = 64
RANDOM_STARTS = 16
NONCONVEX_TOL = 1e-6
INCLUSION_TOL = 1e-9
L1_FACET_LIMIT = 12
MAX_FRONT_LPS = 64

_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass(frozen=True, eq=False)
class SubspacePair:
    """Nested subspaces inner ⊆ outer of l_p^n."""

    inner: Subspace
    outer: Subspace
    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", check_p(self.p))
        if self.inner.ambient_dim != self.outer.ambient_dim:
            raise PreconditionError("inner and outer must share the ambient dimension")
        for b in self.inner.basis:
            d = best_approximation(b, self.outer, 2)[0]
            if d > INCLUSION_TOL * max(1.0, lp_norm(b, 2)):
                raise PreconditionError(f"inner is not contained in outer (distance {d:.3g})")

    @property
    def ambient_dim(self) -> int:
        return self.inner.ambient_dim

    def to_json(self) -> dict:
        from .lp_space import p_to_json

        return {"inner": self.inner.to_json(), "outer": self.outer.to_json(), "p": p_to_json(self.p)}

    @classmethod
    def from_json(cls, obj: dict, p=None) -> "SubspacePair":
        try:
            return cls(Subspace.from_json(obj["inner"]), Subspace.from_json(obj["outer"]), obj["p"] if p is None else p)
        except (KeyError, TypeError) as exc:
            raise PreconditionError(f"malformed pair JSON: {exc}") from None


@dataclass(frozen=True)
class ApproximabilityProfile:
    weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not w or any(not np.isfinite(v) or v <= 0 for v in w):
            raise PreconditionError("profile weights must be finite and strictly positive")
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)


# -- inclination --------------------------------------------------------------


def _start_points(k: int, seed: int, sobol: int, random: int) -> np.ndarray:
    pts = 2.0 * qmc.Sobol(d=k, scramble=False).random(sobol) - 1.0 if sobol else np.empty((0, k))
    rnd = np.random.default_rng(seed).standard_normal((random, k))
    pts = np.vstack([pts, rnd])
    return pts[np.linalg.norm(pts, axis=1) > 1e-12]


def _witness(U, V, a, c, p):
    s = U.matrix @ a
    ns = lp_norm(s, p)
    u = s / ns
    v = V.matrix @ (c / ns)
    return u, v, lp_norm(u - v, p)


def _improve_witness(u, v, value, V, p):
    # an l_2 projection or the exact nearest point can only lower the witness value
    for cand in (V.matrix @ np.linalg.lstsq(V.matrix, u, rcond=None)[0], np.zeros_like(u)):
        d = lp_norm(u - cand, p)
        if d < value:
            v, value = cand, d
    return v, value


def _inclination_l2(U: Subspace, V: Subspace):
    qu, qv = U.orthonormal(), V.orthonormal()
    resid = qu - qv @ (qv.T @ qu)
    _, s, vt = np.linalg.svd(resid)
    a = vt[-1]
    u = qu @ a
    v = qv @ (qv.T @ u)
    return float(s[-1]), u, v


def _inclination_linf(U: Subspace, V: Subspace):
    Um, Vm = U.matrix, V.matrix
    n, k = Um.shape
    l = Vm.shape[1]
    # variables (a, c, s): min s with |Ua - Vc| <= s, |Ua| <= 1, (Ua)_i = 1
    cost = np.r_[np.zeros(k + l), 1.0]
    one = np.ones((n, 1))
    zero = np.zeros((n, 1))
    A_ub = np.block([[Um, -Vm, -one], [-Um, Vm, -one], [Um, np.zeros((n, l)), zero], [-Um, np.zeros((n, l)), zero]])
    b_ub = np.r_[np.zeros(2 * n), np.ones(2 * n)]
    best = None
    for i in range(n):
        if not np.any(Um[i]):
            continue
        A_eq = np.r_[Um[i], np.zeros(l + 1)][None, :]
        res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                      bounds=[(None, None)] * (k + l) + [(0, None)], method="highs", options=_HIGHS)
        if res.status == 0 and (best is None or res.fun < best[0]):
            best = (float(res.fun), res.x[:k], res.x[k:k + l])
    return best


def _inclination_l1(U: Subspace, V: Subspace):
    Um, Vm = U.matrix, V.matrix
    n, k = Um.shape
    l = Vm.shape[1]
    # for each sign pattern sigma of u = Ua (sigma_0 = +1 by symmetry):
    # min ||Ua - Vc||_1 s.t. sigma_j (Ua)_j >= 0, sigma . Ua = 1
    cost = np.r_[np.zeros(k + l), np.ones(n)]
    eye = np.eye(n)
    base = np.block([[Um, -Vm, -eye], [-Um, Vm, -eye]])
    best = None
    for tail in itertools.product((1.0, -1.0), repeat=n - 1):
        sigma = np.r_[1.0, tail]
        A_ub = np.vstack([base, np.hstack([-(sigma[:, None] * Um), np.zeros((n, l + n))])])
        A_eq = np.r_[sigma @ Um, np.zeros(l + n)][None, :]
        if not np.any(A_eq):
            continue
        res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(3 * n), A_eq=A_eq, b_eq=[1.0],
                      bounds=[(None, None)] * (k + l) + [(0, None)] * n, method="highs", options=_HIGHS)
        if res.status == 0 and (best is None or res.fun < best[0]):
            best = (float(res.fun), res.x[:k], res.x[k:k + l])
    return best


def _ratio_and_grad(z, Um, Vm, p):
    k = Um.shape[1]
    a, c = z[:k], z[k:]
    s = Um @ a
    r = s - Vm @ c
    S, R = lp_norm(s, p), lp_norm(r, p)
    if S == 0.0:
        return 1e300, np.zeros_like(z)
    gr, gs = _duality_map(r, p), _duality_map(s, p)
    grad_a = Um.T @ (gr / S - R * gs / S**2)
    grad_c = -(Vm.T @ gr) / S
    return R / S, np.r_[grad_a, grad_c]


def _inclination_multistart(U, V, p, seed, sobol, random, tol):
    Um, Vm = U.matrix, V.matrix
    k = Um.shape[1]
    best = None
    for a0 in _start_points(k, seed, sobol, random):
        c0 = np.linalg.lstsq(Vm, Um @ a0, rcond=None)[0]
        if p in (1, INF):
            # nonsmooth: score the start by the exact inner distance only
            val, c = best_approximation(Um @ a0, V, p)
            val /= lp_norm(Um @ a0, p)
            z = np.r_[a0, c]
        else:
            res = minimize(_ratio_and_grad, np.r_[a0, c0], args=(Um, Vm, p), jac=True, method="BFGS",
                           options={"gtol": tol * 1e-3, "maxiter": 500})
            val, z = float(res.fun), res.x
        if best is None or val < best[0]:
            best = (val, z[:k], z[k:])
    if p in (1, INF):
        def phi(a):
            s = Um @ a
            ns = lp_norm(s, p)
            return 1e300 if ns == 0 else best_approximation(s / ns, V, p)[0]

        res = minimize(phi, best[1], method="Nelder-Mead", options={"xatol": tol, "fatol": tol * 1e-2})
        if res.fun < best[0]:
            s = Um @ res.x
            best = (float(res.fun), res.x, best_approximation(s, V, p)[1])
    return best


def inclination(U: Subspace, V: Subspace, p, seed: int = 0, sobol_starts: int = SOBOL_STARTS,
                random_starts: int = RANDOM_STARTS, tol: float = NONCONVEX_TOL) -> BoundPair:
    """Bounds on delta(U, V) = inf{||u - v||_p : u in U, ||u||_p = 1, v in V}.

    p = 2 uses the smallest singular value of the residual of an orthonormal
    basis of U after projecting onto V. p = inf solves one linear program per
    coordinate where |u| can peak; p = 1 solves one per sign pattern of u
    (up to ``L1_FACET_LIMIT`` coordinates). These three are exact. Other
    exponents use smooth multi-start descent, and only the upper bound is
    certified. The witness ``(u, v)`` realizes the upper bound.
    """
    p = check_p(p)
    if U.ambient_dim != V.ambient_dim:
        raise PreconditionError("U and V must share the ambient dimension")
    exact = True
    if p == 2:
        low, u, v = _inclination_l2(U, V)
        val = lp_norm(u - v, 2)
    else:
        if p == INF:
            found = _inclination_linf(U, V)
        elif p == 1 and U.ambient_dim <= L1_FACET_LIMIT:
            found = _inclination_l1(U, V)
        else:
            found = None
        if found is None:
            exact = False
            found = _inclination_multistart(U, V, p, seed, sobol_starts, random_starts, tol)
        low, a, c = found
        u, v, val = _witness(U, V, a, c, p)
        if p not in (1, 2, INF):
            val, c_exact = best_approximation(u, V, p, tol=min(tol, 1e-8))
            v = V.matrix @ c_exact
        if not exact:
            low = val
    v, val = _improve_witness(u, v, val, V, p)
    low = min(max(low, 0.0), val)
    return BoundPair(low, val, exact, True, witness=(u, v))


# -- minimal-norm extensions --------------------------------------------------


class _ExtensionProblem:
    """Operators u = B_out (C0 + Y Q^T) mapping into outer and fixing inner."""

    def __init__(self, pair: SubspacePair):
        n = pair.ambient_dim
        # coordinates outside the support of outer can be zeroed at no cost
        self.support = np.flatnonzero(np.any(pair.outer.basis != 0.0, axis=0))
        Bo = pair.outer.matrix[self.support]
        Bi = pair.inner.matrix[self.support]
        G = np.linalg.lstsq(Bo, Bi, rcond=None)[0]
        self.n = n
        self.m = len(self.support)
        self.Bo = Bo
        self.Bi = Bi
        self.C0 = G @ np.linalg.pinv(Bi)
        self.Q = null_space(Bi.T)
        ko, free = Bo.shape[1], self.Q.shape[1]
        self.shape = (ko, free)
        self.u0 = Bo @ self.C0
        # vec(u) = vec(u0) + M y, row-major
        self.M = np.einsum("ia,jb->ijab", Bo, self.Q).reshape(self.m * self.m, ko * free)

    def local(self, y) -> np.ndarray:
        if self.M.shape[1] == 0:
            return self.u0.copy()
        return self.u0 + (self.M @ y).reshape(self.m, self.m)

    def embed(self, u_local) -> np.ndarray:
        u = np.zeros((self.n, self.n))
        u[np.ix_(self.support, self.support)] = u_local
        return u

    def weighted_lp(self, w1: float, winf: float):
        """min w1 * max column sum + winf * max row sum over feasible u."""
        m, d = self.m, self.M.shape[1]
        nv = d + m * m + 2
        cost = np.zeros(nv)
        cost[-2], cost[-1] = w1, winf
        eye = np.eye(m * m)
        blocks = [np.hstack([self.M, -eye, np.zeros((m * m, 2))]), np.hstack([-self.M, -eye, np.zeros((m * m, 2))])]
        rows = np.kron(np.eye(m), np.ones((1, m)))
        cols = np.kron(np.ones((1, m)), np.eye(m))
        blocks.append(np.hstack([np.zeros((m, d)), cols, -np.ones((m, 1)), np.zeros((m, 1))]))
        blocks.append(np.hstack([np.zeros((m, d)), rows, np.zeros((m, 1)), -np.ones((m, 1))]))
        u0 = self.u0.reshape(-1)
        b_ub = np.r_[-u0, u0, np.zeros(2 * m)]
        res = linprog(cost, A_ub=np.vstack(blocks), b_ub=b_ub,
                      bounds=[(None, None)] * d + [(0, None)] * (m * m + 2), method="highs", options=_HIGHS)
        if res.status != 0:
            raise PreconditionError(f"extension linear program failed: {res.message}")
        u = self.local(res.x[:d])
        return u, float(res.fun)


def _sums(u):
    a = np.abs(u)
    return float(a.sum(axis=0).max()), float(a.sum(axis=1).max())


def _pareto_vertices(prob: _ExtensionProblem):
    """Vertices of the (max column sum, max row sum) Pareto front of feasible u."""
    eps = 1e-6
    found = []
    count = [0]

    def solve(w):
        count[0] += 1
        u, _ = prob.weighted_lp(w, 1.0 - w)
        found.append(u)
        return _sums(u)

    def explore(A, B, depth):
        if depth > 30 or count[0] >= MAX_FRONT_LPS:
            return
        if abs(A[0] - B[0]) <= 1e-12 * (1 + A[0]) and abs(A[1] - B[1]) <= 1e-12 * (1 + A[1]):
            return
        den = (A[0] - A[1]) - (B[0] - B[1])
        if den == 0:
            return
        w = (B[1] - A[1]) / den
        if not 0.0 < w < 1.0:
            return
        C = solve(w)
        obj = lambda P: w * P[0] + (1 - w) * P[1]
        if obj(C) >= min(obj(A), obj(B)) - 1e-10 * (1 + obj(A)):
            return
        explore(A, C, depth + 1)
        explore(C, B, depth + 1)

    A, B = solve(1.0 - eps), solve(eps)
    explore(A, B, 0)
    return found


def _relaxation_lower(prob: _ExtensionProblem, pair: SubspacePair, seed: int) -> float | None:
    """min_u max_{v in T} ||uv||_p / ||v||_p over a finite test set T.

    Any finite T gives a lower bound on the minimal extension norm.
    """
    import cvxpy as cp

    p = pair.p
    m = prob.m
    if m <= 10:
        signs = [np.r_[1.0, t] for t in itertools.product((1.0, -1.0), repeat=m - 1)]
    else:
        signs = list(np.random.default_rng(seed).choice([-1.0, 1.0], size=(256, m)))
    tests = list(np.eye(m)) + list(prob.Bi.T) + signs
    ko, free = prob.shape
    t = cp.Variable()
    if free:
        Y = cp.Variable((ko, free))
        u = prob.Bo @ (prob.C0 + Y @ prob.Q.T)
    else:
        u = prob.u0
    cons = [cp.pnorm(u @ v, p) <= t * lp_norm(v, p) for v in tests]
    problem = cp.Problem(cp.Minimize(t), cons)
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError as exc:
        logger.warning("relaxation solve failed: %s", exc)
        return None
    if problem.status != cp.OPTIMAL or t.value is None:
        return None
    return float(t.value) * (1.0 - 1e-7)


def min_extension_norm(pair: SubspacePair, seed: int = 0, relaxation: bool = True) -> BoundPair:
    """Bounds on min ||u||_p over linear u: R^n -> outer with u = I on inner.

    The witness is the n x n matrix of an optimal candidate and the upper
    bound is ``operator_norm_bounds(witness, p).upper``. For p in {1, inf}
    the problem is a linear program and both bounds are exact; for p = 2 the
    orthogonal projection onto outer is optimal. Otherwise the candidate
    minimizes the interpolation bound ||u||_1^(1/p) ||u||_inf^(1-1/p), and
    the lower bound is 1 or, with ``relaxation``, the value of a convex
    relaxation over finitely many test vectors (not certified).
    """
    p = pair.p
    prob = _ExtensionProblem(pair)
    if p == 2:
        qo = np.linalg.qr(prob.Bo)[0]
        u = prob.embed(qo @ qo.T)
        up = operator_norm_bounds(u, 2).upper
        return BoundPair(min(1.0, up), up, True, True, witness=u)
    if p in (1, INF):
        w1 = 1.0 if p == 1 else 0.0
        u_local, val = prob.weighted_lp(w1, 1.0 - w1)
        u = prob.embed(u_local)
        up = operator_norm_bounds(u, p).upper
        return BoundPair(min(max(1.0, val), up), up, True, True, witness=u)
    qo = np.linalg.qr(prob.Bo)[0]
    candidates = [qo @ qo.T] + _pareto_vertices(prob)
    scored = [(operator_norm_bounds(prob.embed(c), p).upper, i) for i, c in enumerate(candidates)]
    up, i = min(scored)
    u = prob.embed(candidates[i])
    low, certified = 1.0, True
    if relaxation and up > 1.0 + 1e-12:
        relax = _relaxation_lower(prob, pair, seed)
        if relax is not None and relax > 1.0:
            low, certified = relax, False
    return BoundPair(min(low, up), up, certified, True, witness=u)


# -- approximability reports --------------------------------------------------


@dataclass
class UniformReport:
    bounds: list
    sup_upper: float
    lam: float
    uniform: bool
    lower_nondecreasing: bool
    lower_slope: float | None

    def rows(self):
        return [
            {"index": i + 1, "lower": b.lower, "upper": b.upper,
             "certified_lower": b.certified_lower, "certified_upper": b.certified_upper}
            for i, b in enumerate(self.bounds)
        ]


@dataclass
class FApproximabilityReport:
    bounds: list
    ratios: list
    constant: float
    f_approximable: bool
    weights: tuple = field(default=())


def _trend(values):
    if len(values) < 2:
        return None
    x = np.arange(1, len(values) + 1, dtype=float)
    return float(np.polyfit(x, np.asarray(values), 1)[0])


def uniform_approximability_report(pairs: Sequence[SubspacePair], lam: float | None = None,
                                   bounds: Sequence[BoundPair] | None = None, **opts) -> UniformReport:
    """Per-pair extension bounds and a uniform-approximability verdict.

    With ``lam`` given the verdict is whether every certified upper bound is
    at most ``lam``; otherwise ``lam`` is the largest upper bound and the
    verdict holds trivially. Non-uniformity is never concluded: only the
    trend of the lower bounds is reported.
    """
    if not pairs:
        raise PreconditionError("need at least one pair")
    bounds = list(bounds) if bounds is not None else [min_extension_norm(pr, **opts) for pr in pairs]
    sup_upper = max(b.upper for b in bounds)
    lam_used = sup_upper if lam is None else float(lam)
    lowers = [b.lower for b in bounds]
    return UniformReport(
        bounds=bounds,
        sup_upper=sup_upper,
        lam=lam_used,
        uniform=all(b.upper <= lam_used for b in bounds),
        lower_nondecreasing=all(b >= a - 1e-12 for a, b in zip(lowers, lowers[1:])),
        lower_slope=_trend(lowers),
    )


def f_approximability_check(pairs: Sequence[SubspacePair], profile: ApproximabilityProfile,
                            constant: float | None = None, bounds: Sequence[BoundPair] | None = None,
                            **opts) -> FApproximabilityReport:
    """Ratios upper_i / f(i) and the verdict sup_i ratio <= constant."""
    if not isinstance(profile, ApproximabilityProfile):
        profile = ApproximabilityProfile(tuple(profile))
    if len(pairs) != len(profile):
        raise PreconditionError(f"{len(pairs)} pairs but {len(profile)} weights")
    if not pairs:
        raise PreconditionError("need at least one pair")
    bounds = list(bounds) if bounds is not None else [min_extension_norm(pr, **opts) for pr in pairs]
    ratios = [b.upper / f for b, f in zip(bounds, profile.weights)]
    C = max(ratios) if constant is None else float(constant)
    return FApproximabilityReport(bounds, ratios, C, all(r <= C for r in ratios), profile.weights)


# -- Banach-Mazur distance and test families ----------------------------------


def bm_distance_to_l2(E: Subspace, p, seed: int = 0) -> BoundPair:
    """Bounds on d(E, l_2^k) from the map T sending an l_2-orthonormal basis of E to unit vectors.

    The upper bound ||T|| ||T^-1|| is certified; each factor is the smaller of
    a norm-comparison constant and an interpolation bound. The lower bound is
    the trivial 1, so for p != 2 the interval is wide.
    """
    p = check_p(p)
    Q = E.orthonormal()
    n, k = Q.shape
    inv_p = 0.0 if p == INF else 1.0 / p
    alpha, beta = max(0.0, inv_p - 0.5), max(0.0, 0.5 - inv_p)
    # ||T^-1||: l_2^k -> (E, l_p);  ||T||: (E, l_p) -> l_2^k
    t_inv = min(n**alpha, operator_norm_bounds(Q, p, seed=seed).upper * k**alpha)
    t_fwd = min(n**beta, operator_norm_bounds(Q.T, p, seed=seed).upper * k**beta)
    upper = max(1.0, t_inv * t_fwd)
    return BoundPair(1.0, upper, True, True, witness=Q)


def rosenthal_like_subspaces(i_max: int, N: int, p, seed: int = 0, spread: int | None = None) -> list:
    """Disjointly supported test subspaces W_1, ..., W_{i_max} of l_p^N.

    W_i lives on its own block of ``i * spread`` coordinates and is spanned by
    i random sign vectors normalized in l_p. With spread 1 each W_i is a
    coordinate block, isometric to l_p^i; wide blocks push W_i towards
    Rademacher spans, which look like l_2^i. ``spread`` defaults to the
    widest value that fits.
    """
    p = check_p(p)
    blocks = i_max * (i_max + 1) // 2
    if i_max < 1 or blocks > N:
        raise PreconditionError(f"{blocks} blocks do not fit in {N} coordinates")
    spread = N // blocks if spread is None else int(spread)
    if spread < 1 or blocks * spread > N:
        raise PreconditionError(f"spread {spread} does not fit in {N} coordinates")
    rng = np.random.default_rng(seed)
    out, offset = [], 0
    for i in range(1, i_max + 1):
        width = i * spread
        while True:
            signs = rng.choice([-1.0, 1.0], size=(i, width))
            if np.linalg.matrix_rank(signs) == i:
                break
        basis = np.zeros((i, N))
        basis[:, offset:offset + width] = signs / lp_norm(signs[0], p)
        out.append(Subspace(basis))
        offset += width
    return out


def graph_shadow(W_list: Sequence[Subspace]):
    """Finite model of H = {x - Tx : x in W} in the product R^N x R^M.

    T sends the l_2-orthonormal basis of each W_i to the unit vectors of its
    own coordinate block U_i of R^M (M = sum dim W_i). Returns ``(H, Y)``
    where ``Y[i]`` is W_i embedded as ``(w, 0)``. The product carries the
    l_p-sum of the factors, i.e. plain l_p on concatenated coordinates.
    """
    N = W_list[0].ambient_dim
    M = sum(W.dim for W in W_list)
    rows, Y, offset = [], [], 0
    for W in W_list:
        Q = W.orthonormal()
        for j in range(W.dim):
            h = np.zeros(N + M)
            h[:N] = Q[:, j]
            h[N + offset + j] = -1.0
            rows.append(h)
        Y.append(Subspace(np.hstack([W.basis, np.zeros((W.dim, M))])))
        offset += W.dim
    return Subspace(np.array(rows)), Y
