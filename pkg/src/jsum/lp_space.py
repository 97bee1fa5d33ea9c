"""Finite-dimensional l_p vectors and subspaces.

Vectors are plain 1-D float arrays. A :class:`Subspace` wraps a linearly
independent spanning list. Exponents are floats with ``math.inf`` for the
sup-norm; ``"inf"`` is accepted wherever an exponent is parsed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import PreconditionError, UnconvergedError

INF = math.inf

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000
REL_IMPROVEMENT = 1e-12
RANK_TOL = 1e-10

_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def check_p(p) -> float:
    """Validate an exponent and return it as a float (``inf`` allowed)."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "+inf"):
            return INF
        try:
            p = float(p)
        except ValueError:
            raise PreconditionError(f"invalid exponent {p!r}") from None
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise PreconditionError(f"invalid exponent {p!r}") from None
    if math.isnan(p) or p < 1:
        raise PreconditionError(f"exponent must satisfy p >= 1 or p = inf, got {p}")
    return p


def p_to_json(p):
    p = check_p(p)
    return "inf" if p == INF else p


def p_from_json(obj) -> float:
    return check_p(obj)


def as_vector(v, dim: int | None = None) -> np.ndarray:
    x = np.asarray(v, dtype=float)
    if x.ndim != 1:
        raise PreconditionError(f"expected a 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise PreconditionError("vector entries must be finite")
    if dim is not None and x.shape[0] != dim:
        raise PreconditionError(f"expected ambient dimension {dim}, got {x.shape[0]}")
    return x


def lp_norm(v, p) -> float:
    """l_p norm of ``v``, scaled by the largest entry to avoid overflow."""
    p = check_p(p)
    x = np.abs(as_vector(v))
    if x.size == 0:
        return 0.0
    m = float(x.max())
    if m == 0.0:
        return 0.0
    if p == INF:
        return m
    if p == 1:
        return float(x.sum())
    return float(m * np.sum((x / m) ** p) ** (1.0 / p))


def dual_exponent(p) -> float:
    p = check_p(p)
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    return p / (p - 1.0)


def lp_direct_sum(component_norms: Sequence[float], p) -> float:
    """Norm of a direct sum whose summands have the given norms."""
    x = as_vector(list(component_norms))
    if np.any(x < 0):
        raise PreconditionError("component norms must be non-negative")
    return lp_norm(x, p)


@dataclass(frozen=True)
class BoundPair:
    """Interval answer for a quantity computed by optimization.

    ``witness`` optionally carries the object realizing the upper bound
    (a unit vector, an operator matrix, ...).
    """

    lower: float
    upper: float
    certified_lower: bool
    certified_upper: bool
    witness: Any = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.lower < 0 or self.upper < 0:
            raise PreconditionError("bounds must be non-negative")
        if self.lower > self.upper + 1e-12:
            raise PreconditionError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    def to_json(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "certified_lower": self.certified_lower,
            "certified_upper": self.certified_upper,
        }


class Subspace:
    """Finite-dimensional subspace of R^n given by independent basis vectors.

    Rank-deficient spanning lists are rejected rather than repaired.
    """

    __slots__ = ("_basis",)

    def __init__(self, basis):
        b = np.array(basis, dtype=float)
        if b.ndim == 1:
            b = b[None, :]
        if b.ndim != 2 or b.shape[0] == 0 or b.shape[1] == 0:
            raise PreconditionError("a subspace needs a nonempty list of nonempty vectors")
        if not np.all(np.isfinite(b)):
            raise PreconditionError("basis entries must be finite")
        s = np.linalg.svd(b, compute_uv=False)
        if s[0] == 0.0 or s[-1] <= RANK_TOL * s[0] or b.shape[0] > b.shape[1]:
            raise PreconditionError("basis vectors are linearly dependent")
        b.setflags(write=False)
        self._basis = b

    @property
    def basis(self) -> np.ndarray:
        """Basis vectors as rows, shape ``(dim, ambient_dim)``."""
        return self._basis

    @property
    def matrix(self) -> np.ndarray:
        """Basis vectors as columns, shape ``(ambient_dim, dim)``."""
        return self._basis.T

    @property
    def dim(self) -> int:
        return self._basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self._basis.shape[1]

    def orthonormal(self) -> np.ndarray:
        """Columns of an l_2-orthonormal basis of the same span."""
        q, _ = np.linalg.qr(self.matrix)
        return q

    @classmethod
    def coordinate(cls, indices: Sequence[int], ambient_dim: int) -> "Subspace":
        """Span of the unit vectors ``e_i`` for 0-based ``indices``."""
        return cls(np.eye(ambient_dim)[list(indices)])

    def to_json(self) -> dict:
        return {"ambient_dim": self.ambient_dim, "basis": self._basis.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Subspace":
        try:
            n = int(obj["ambient_dim"])
            basis = obj["basis"]
        except (KeyError, TypeError, ValueError) as exc:
            raise PreconditionError(f"malformed subspace JSON: {exc}") from None
        if any(len(row) != n for row in basis):
            raise PreconditionError("basis vector length differs from ambient_dim")
        return cls(basis)

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def vector_to_json(v) -> dict:
    x = as_vector(v)
    return {"ambient_dim": int(x.shape[0]), "coords": x.tolist()}


def vector_from_json(obj: dict) -> np.ndarray:
    try:
        return as_vector(obj["coords"], int(obj["ambient_dim"]))
    except (KeyError, TypeError) as exc:
        raise PreconditionError(f"malformed vector JSON: {exc}") from None


# -- distance to a subspace ---------------------------------------------------


def _lp_linprog(v: np.ndarray, B: np.ndarray, p: float) -> np.ndarray:
    n, k = B.shape
    if p == 1:
        # variables (c, t): min sum t, -t <= v - Bc <= t
        cost = np.r_[np.zeros(k), np.ones(n)]
        A_ub = np.block([[B, -np.eye(n)], [-B, -np.eye(n)]])
        bounds = [(None, None)] * k + [(0, None)] * n
    else:
        # variables (c, s): min s, -s <= v - Bc <= s
        cost = np.r_[np.zeros(k), 1.0]
        ones = np.ones((n, 1))
        A_ub = np.block([[B, -ones], [-B, -ones]])
        bounds = [(None, None)] * k + [(0, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=np.r_[v, -v], bounds=bounds, method="highs", options=_HIGHS)
    if res.status != 0:
        raise UnconvergedError(f"linear program failed: {res.message}", best=lp_norm(v, p))
    return res.x[:k]


def _lp_newton(v, B, p, tol, max_iter) -> np.ndarray:
    # minimize F(c) = sum |v - Bc|^p, strictly convex for 1 < p < inf
    scale = float(np.abs(v).max())
    if scale == 0.0:
        return np.zeros(B.shape[1])
    y = v / scale
    c = np.linalg.lstsq(B, y, rcond=None)[0]

    def objective(coef):
        return float(np.sum(np.abs(y - B @ coef) ** p))

    F = objective(c)
    k = B.shape[1]
    for _ in range(max_iter):
        if F == 0.0:
            return c * scale
        r = y - B @ c
        a = np.abs(r)
        grad = -p * (B.T @ (np.sign(r) * a ** (p - 1)))
        floor = max(float(a.max()) * 1e-12, 1e-300)
        w = p * (p - 1) * np.maximum(a, floor) ** (p - 2)
        H = (B.T * w) @ B
        H += np.eye(k) * (1e-14 * np.trace(H) / k + 1e-300)
        step = np.linalg.solve(H, -grad)
        slope = float(grad @ step)
        if -slope <= 2.0 * p * F * tol * tol:
            return c * scale
        t = 1.0
        improved = False
        for _ in range(60):
            cand = c + t * step
            Fc = objective(cand)
            if Fc <= F + 1e-4 * t * slope:
                improved = True
                break
            t *= 0.5
        if not improved:
            return c * scale
        gain = F - Fc
        c, F = cand, Fc
        if gain <= REL_IMPROVEMENT * F:
            return c * scale
    raise UnconvergedError(
        f"l_{p} distance did not converge in {max_iter} iterations",
        best=scale * F ** (1.0 / p),
    )


def best_approximation(v, V: Subspace, p, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Nearest point of ``V`` to ``v`` in the l_p norm.

    Returns ``(distance, coefficients)`` where the coefficients refer to
    ``V.basis``. The distance is recomputed from the coefficients, so it is
    always achieved by a concrete point of ``V``.
    """
    p = check_p(p)
    x = as_vector(v, V.ambient_dim)
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    B = V.matrix
    if p == 2:
        c = np.linalg.lstsq(B, x, rcond=None)[0]
    elif p in (1, INF):
        c = _lp_linprog(x, B, p)
    else:
        c = _lp_newton(x, B, p, tol, max_iter)
    return lp_norm(x - B @ c, p), c


def dist_to_subspace(v, V: Subspace, p, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """l_p distance from ``v`` to the subspace ``V``."""
    return best_approximation(v, V, p, tol, max_iter)[0]


# -- operator norms -----------------------------------------------------------


def _duality_map(y: np.ndarray, p: float) -> np.ndarray:
    # unit vector in l_q norming y: <map(y), y> = ||y||_p
    if p == INF:
        out = np.zeros_like(y)
        i = int(np.argmax(np.abs(y)))
        out[i] = np.sign(y[i])
        return out
    if p == 1:
        return np.sign(y)
    ny = lp_norm(y, p)
    if ny == 0:
        return np.zeros_like(y)
    return np.sign(y) * (np.abs(y) / ny) ** (p - 1)


def _p_power_ascent(A, x, p, max_iter=100):
    """Local ascent of ||Ax||_p / ||x||_p (Boyd/Higham fixed-point iteration)."""
    q = dual_exponent(p)
    x = x / lp_norm(x, p)
    best = lp_norm(A @ x, p)
    for _ in range(max_iter):
        z = A.T @ _duality_map(A @ x, p)
        if lp_norm(z, q) <= z @ x * (1 + 1e-14):
            break
        x = _duality_map(z, q)
        val = lp_norm(A @ x, p)
        if val <= best * (1 + 1e-14):
            best = max(best, val)
            break
        best = val
    return best


def operator_norm_bounds(A, p, starts: int = 16, seed: int = 0) -> BoundPair:
    """Bounds on the l_p -> l_p operator norm of a matrix.

    Exact for p in {1, 2, inf}. Otherwise the upper bound is the
    Riesz-Thorin interpolation bound and the lower bound is the best ratio
    ||Av||/||v|| found by multi-start power ascent.
    """
    p = check_p(p)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise PreconditionError("operator_norm_bounds needs a nonempty 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise PreconditionError("matrix entries must be finite")
    col = float(np.abs(A).sum(axis=0).max())
    row = float(np.abs(A).sum(axis=1).max())
    if p == 1:
        return BoundPair(col, col, True, True)
    if p == INF:
        return BoundPair(row, row, True, True)
    if p == 2:
        s = float(np.linalg.norm(A, 2))
        return BoundPair(s, s, True, True)
    upper = col ** (1.0 / p) * row ** (1.0 - 1.0 / p)
    rng = np.random.default_rng(seed)
    n = A.shape[1]
    candidates = [np.ones(n)]
    for j in np.argsort(-np.abs(A).sum(axis=0))[: min(n, starts)]:
        candidates.append(np.eye(n)[j])
    candidates.extend(rng.standard_normal((starts, n)))
    lower = max(_p_power_ascent(A, x, p) for x in candidates if np.any(x))
    return BoundPair(min(lower, upper), upper, True, True)
