"""J-sums over the coordinate spaces X_n = span(e_1, ..., e_n) of l_p.

A :class:`JVector` is a finitely presented sequence ``(x_0, x_1, ..., x_N)``
with ``x_i`` of length ``i`` (so ``x_0`` is the empty vector) followed either
by zeros or by the constant value ``x_N``. Shorter entries embed into longer
ones by zero padding, which makes ``X_i`` a subspace of ``X_{i+1}``.

The J-norm is

    2 ||x||_J^2 = sup_{p(1) < ... < p(k)}  sum_i ||x_{p(i)} - x_{p(i+1)}||^2 + ||x_{p(k)}||^2

and is computed exactly by dynamic programming over the first index of the
chain; :func:`enumerate_chains_oracle` is the brute-force cross-check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConsistencyError, PreconditionError
from .lp_space import INF, as_vector, check_p, lp_norm, p_from_json, p_to_json

ORACLE_MAX_HORIZON = 16
STABILIZATION_WINDOW = 4
STABILIZATION_TOL = 1e-10


def _pad(v: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    out[: min(n, v.shape[0])] = v[:n]
    return out


@dataclass(frozen=True, eq=False)
class JVector:
    """Finitely presented element of J(X_n) (zero tail) or Omega(X_n) (constant tail)."""

    p: float
    entries: tuple
    constant_tail: bool = False

    def __post_init__(self):
        p = check_p(self.p)
        if not self.entries:
            raise PreconditionError("a JVector needs at least the entry x_0")
        entries = []
        for i, e in enumerate(self.entries):
            x = as_vector(e)
            if x.shape[0] != i:
                raise PreconditionError(f"entry {i} must have ambient dimension {i}, got {x.shape[0]}")
            x = x.copy()
            x.setflags(write=False)
            entries.append(x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "entries", tuple(entries))

    @property
    def N(self) -> int:
        """Index of the last explicit entry."""
        return len(self.entries) - 1

    @property
    def tail(self):
        """``None`` for a zero tail, else the constant value ``x_N``."""
        return self.entries[-1] if self.constant_tail else None

    def entry(self, n: int) -> np.ndarray:
        """The entry x_n (length n), resolving indices past N by the tail."""
        if n < 0:
            raise PreconditionError("entry index must be non-negative")
        if n <= self.N:
            return self.entries[n]
        if self.constant_tail:
            return _pad(self.entries[-1], n)
        return np.zeros(n)

    def padded(self, horizon: int, width: int | None = None) -> np.ndarray:
        """Rows x_0, ..., x_horizon zero-padded to a common width."""
        width = max(horizon, 0) if width is None else width
        return np.array([_pad(self.entry(n), width) for n in range(horizon + 1)])

    def is_zero(self) -> bool:
        return all(not np.any(e) for e in self.entries)

    def __add__(self, other):
        return jvec_lincomb([1.0, 1.0], [self, other])

    def __sub__(self, other):
        return jvec_lincomb([1.0, -1.0], [self, other])

    def __neg__(self):
        return jvec_lincomb([-1.0], [self])

    def __mul__(self, t):
        return jvec_lincomb([float(t)], [self])

    __rmul__ = __mul__

    def __repr__(self):
        tail = "constant" if self.constant_tail else "zero"
        return f"JVector(p={self.p}, N={self.N}, tail={tail})"

    def to_json(self) -> dict:
        tail = {"constant": self.entries[-1].tolist()} if self.constant_tail else "zero"
        return {"p": p_to_json(self.p), "entries": [e.tolist() for e in self.entries], "tail": tail}

    @classmethod
    def from_json(cls, obj: dict, p=None) -> "JVector":
        try:
            entries = obj["entries"]
            tail = obj.get("tail", "zero")
            p = obj["p"] if p is None else p
        except (KeyError, TypeError, AttributeError) as exc:
            raise PreconditionError(f"malformed JVector JSON: {exc}") from None
        if tail == "zero":
            return cls(p_from_json(p), tuple(entries))
        if isinstance(tail, dict) and set(tail) == {"constant"}:
            value = as_vector(tail["constant"])
            if not entries or value.shape[0] != len(entries) - 1 or np.any(value != as_vector(entries[-1])):
                raise PreconditionError("constant tail must equal the last entry x_N")
            return cls(p_from_json(p), tuple(entries), constant_tail=True)
        raise PreconditionError(f"unknown tail mode {tail!r}")


def zero_jvector(N: int, p, constant_tail: bool = False) -> JVector:
    return JVector(p, tuple(np.zeros(i) for i in range(N + 1)), constant_tail)


def jvector_from_entries(entries: Sequence, p, constant_tail: bool = False) -> JVector:
    """Build a JVector from possibly short entries; entry i is zero-padded to length i."""
    return JVector(p, tuple(_pad(as_vector(e), i) for i, e in enumerate(entries)), constant_tail)


# -- chains -------------------------------------------------------------------


def check_chain(chain: Sequence[int]) -> tuple:
    idx = tuple(int(i) for i in chain)
    if not idx:
        raise PreconditionError("a chain needs at least one index")
    if idx[0] < 0:
        raise PreconditionError("chain indices must be non-negative")
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise PreconditionError(f"chain must be strictly increasing: {idx}")
    return idx


def chain_value(x: JVector, chain: Sequence[int], horizon: int | None = None) -> float:
    """sum ||x_{p(i)} - x_{p(i+1)}||^2 + ||x_{p(k)}||^2 along one chain."""
    idx = check_chain(chain)
    horizon = x.N + 1 if horizon is None else int(horizon)
    if horizon < x.N + 1:
        raise PreconditionError(f"horizon must be at least N+1 = {x.N + 1}")
    if idx[-1] > horizon:
        raise PreconditionError(f"chain index {idx[-1]} exceeds horizon {horizon}")
    width = idx[-1]
    rows = [_pad(x.entry(i), width) for i in idx]
    total = 0.0
    for a, b in zip(rows, rows[1:]):
        total += lp_norm(a - b, x.p) ** 2
    return total + lp_norm(rows[-1], x.p) ** 2


def _oracle_norm(v: Sequence[float], p: float) -> float:
    a = [abs(t) for t in v]
    if not a or max(a) == 0.0:
        return 0.0
    if p == INF:
        return max(a)
    return math.fsum(t**p for t in a) ** (1.0 / p)


def enumerate_chains_oracle(x: JVector, horizon: int) -> float:
    """Max of the chain value over every nonempty chain in [0, horizon], by brute force.

    Uses its own pure-Python norm so it shares no arithmetic with :func:`j_norm`.
    """
    horizon = int(horizon)
    if horizon > ORACLE_MAX_HORIZON:
        raise PreconditionError(f"oracle horizon {horizon} exceeds {ORACLE_MAX_HORIZON}")
    if horizon < 0:
        raise PreconditionError("horizon must be non-negative")
    p = x.p
    width = max(horizon, x.N)
    rows = [list(_pad(x.entry(i), width)) for i in range(horizon + 1)]
    diff = {}
    for i, j in itertools.combinations(range(horizon + 1), 2):
        diff[i, j] = _oracle_norm([a - b for a, b in zip(rows[i], rows[j])], p) ** 2
    last = [_oracle_norm(r, p) ** 2 for r in rows]
    best = 0.0
    for k in range(1, horizon + 2):
        for chain in itertools.combinations(range(horizon + 1), k):
            s = last[chain[-1]]
            for a, b in zip(chain, chain[1:]):
                s += diff[a, b]
            if s > best:
                best = s
    return best


def _row_sq_norms(A: np.ndarray, p: float) -> np.ndarray:
    # squared l_p norms along the last axis, scaled by the row maximum
    a = np.abs(A)
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1])
    m = a.max(axis=-1)
    if p == INF:
        return m * m
    safe = np.where(m > 0, m, 1.0)
    r = np.sum((a / safe[..., None]) ** p, axis=-1) ** (1.0 / p)
    return (m * r) ** 2


def j_norm_with_chain(x: JVector):
    """J-norm of a zero-tail vector and a chain attaining it.

    Dynamic program over the first chain index: with W(j) the best value
    of a chain starting at j,

        W(j) = max(||x_j||^2, max_{l > j} ||x_j - x_l||^2 + W(l)),

    and ``2 ||x||_J^2 = max_j W(j)`` over indices 0..N+1.
    """
    if x.constant_tail:
        raise PreconditionError("j_norm needs a zero tail; use k_norm for constant tails")
    horizon = x.N + 1
    X = x.padded(horizon)
    sq = _row_sq_norms(X, x.p)
    D = _row_sq_norms(X[:, None, :] - X[None, :, :], x.p)
    W = sq.copy()
    nxt = np.full(horizon + 1, -1)
    for j in range(horizon - 1, -1, -1):
        cand = D[j, j + 1:] + W[j + 1:]
        l = int(np.argmax(cand))
        if cand[l] > W[j]:
            W[j] = cand[l]
            nxt[j] = j + 1 + l
    j = int(np.argmax(W))
    best = float(W[j])
    chain = [j]
    while nxt[chain[-1]] >= 0:
        chain.append(int(nxt[chain[-1]]))
    return math.sqrt(best / 2.0), tuple(chain)


def j_norm(x: JVector) -> float:
    return j_norm_with_chain(x)[0]


def truncate(x: JVector, n: int) -> JVector:
    """(x_0, ..., x_n, 0, 0, ...) as a zero-tail vector."""
    n = int(n)
    if n < 0:
        raise PreconditionError("truncation index must be non-negative")
    if not x.constant_tail and n >= x.N:
        return x
    return JVector(x.p, tuple(x.entry(i) for i in range(n + 1)))


def k_norm(x: JVector) -> float:
    """sup_n ||truncate(x, n)||_J.

    Truncations have non-decreasing J-norm and a constant tail stops
    contributing once it starts, so the sup is attained at n = N. The
    stabilization is re-checked on a few later truncations.
    """
    if not x.constant_tail:
        return j_norm(x)
    value = j_norm(truncate(x, x.N))
    for n in range(x.N + 1, x.N + STABILIZATION_WINDOW + 1):
        later = j_norm(truncate(x, n))
        if abs(later - value) > STABILIZATION_TOL * max(1.0, value):
            raise ConsistencyError(
                f"K-norm failed to stabilize: truncation {x.N} gives {value!r}, truncation {n} gives {later!r}"
            )
    return value


def omega_seminorm(x: JVector) -> float:
    """lim ||x_k||: the norm of the constant tail, 0 for a zero tail."""
    if not x.constant_tail:
        return 0.0
    return lp_norm(x.entries[-1], x.p)


def canonical_f(i: int, N: int, p) -> JVector:
    """f_i = (0, ..., 0, e_i, e_i, ...): e_i from index i on, constant tail."""
    if not 1 <= i <= N:
        raise PreconditionError(f"need 1 <= i <= N, got i={i}, N={N}")
    entries = [np.zeros(n) for n in range(i)]
    for n in range(i, N + 1):
        e = np.zeros(n)
        e[i - 1] = 1.0
        entries.append(e)
    return JVector(p, tuple(entries), constant_tail=True)


def canonical_basis_fn(i: int, n: int, p) -> JVector:
    """f_i^n: the single entry e_i at position n, zero elsewhere."""
    if not 1 <= i <= n:
        raise PreconditionError(f"need 1 <= i <= n, got i={i}, n={n}")
    entries = [np.zeros(m) for m in range(n + 1)]
    entries[n][i - 1] = 1.0
    return JVector(p, tuple(entries))


def jvec_lincomb(coeffs: Sequence[float], xs: Sequence[JVector]) -> JVector:
    """Entrywise linear combination; shorter inputs are extended by their tails."""
    if len(coeffs) != len(xs) or not xs:
        raise PreconditionError("need equally many (nonzero count) coefficients and vectors")
    p = xs[0].p
    if any(x.p != p for x in xs):
        raise PreconditionError("cannot combine JVectors with different exponents")
    N = max(x.N for x in xs)
    entries = []
    for n in range(N + 1):
        acc = np.zeros(n)
        for a, x in zip(coeffs, xs):
            acc = acc + float(a) * x.entry(n)
        entries.append(acc)
    return JVector(p, tuple(entries), constant_tail=any(x.constant_tail for x in xs))


def sum_of_f(coeffs: Sequence[float], p) -> JVector:
    """sum_i a_i f_i, whose n-th entry is (a_1, ..., a_n) for n <= len(a)."""
    a = as_vector(coeffs)
    if a.shape[0] == 0:
        raise PreconditionError("need at least one coefficient")
    return JVector(p, tuple(a[:n].copy() for n in range(a.shape[0] + 1)), constant_tail=True)


def basis_coordinates(x: JVector) -> dict:
    """Coefficients of a zero-tail vector in the system f_i^n, keyed by (i, n)."""
    if x.constant_tail:
        raise PreconditionError("only zero-tail vectors expand in the f_i^n system")
    return {(i + 1, n): float(v) for n, e in enumerate(x.entries) for i, v in enumerate(e) if v != 0.0}


def from_basis_coordinates(coords: dict, p, N: int | None = None) -> JVector:
    top = max((n for _, n in coords), default=0)
    N = top if N is None else max(N, top)
    entries = [np.zeros(n) for n in range(N + 1)]
    for (i, n), v in coords.items():
        if not 1 <= i <= n:
            raise PreconditionError(f"invalid basis index (i={i}, n={n})")
        entries[n][i - 1] += v
    return JVector(p, tuple(entries))


# -- gliding humps ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GlidingHumpFamily:
    """Humps g_1, ..., g_r with separated index blocks.

    ``chains[k]`` is a chain attaining ``2 ||g_k||^2``; it starts and ends
    at zero entries just outside block k, so the chains of different humps
    concatenate.
    """

    humps: tuple
    active_ranges: tuple
    chains: tuple

    @property
    def p(self) -> float:
        return self.humps[0].p

    def combination(self, coeffs: Sequence[float]) -> JVector:
        if len(coeffs) != len(self.humps):
            raise PreconditionError("need one coefficient per hump")
        return jvec_lincomb(coeffs, self.humps)

    def concatenated_chain(self, r: int | None = None) -> tuple:
        out = []
        for ch in self.chains[: len(self.chains) if r is None else r]:
            out.extend(i for i in ch if not out or i > out[-1])
        return tuple(out)


def gliding_hump_family(block_boundaries: Sequence, block_payloads: Sequence, p) -> GlidingHumpFamily:
    """Build humps supported on separated index blocks.

    ``block_boundaries`` is a list of inclusive ``(start, end)`` index
    intervals with ``start >= 1``; consecutive blocks must leave at least
    one index between them, the zero entry through which chains of
    neighbouring humps are joined. ``block_payloads[k]`` is either a single
    vector, used as the entry at every index of block k, or a list of
    ``end - start + 1`` vectors, one per index. A payload vector for index
    n may be shorter than n and is zero-padded; it may not be longer.
    """
    p = check_p(p)
    if len(block_boundaries) != len(block_payloads) or not block_boundaries:
        raise PreconditionError("need one payload per block and at least one block")
    ranges = []
    for b in block_boundaries:
        s, t = (int(v) for v in b)
        if s < 1 or t < s:
            raise PreconditionError(f"invalid block {b!r}")
        if ranges and s <= ranges[-1][1]:
            raise PreconditionError(f"blocks overlap or are out of order: {ranges[-1]} and {(s, t)}")
        if ranges and s == ranges[-1][1] + 1:
            raise PreconditionError(f"blocks {ranges[-1]} and {(s, t)} need a separating index")
        ranges.append((s, t))
    N = ranges[-1][1]
    humps, chains = [], []
    for (s, t), payload in zip(ranges, block_payloads):
        width = t - s + 1
        if all(np.isscalar(v) for v in payload):
            arr = [payload] * width
        else:
            arr = list(payload)
        if len(arr) != width:
            raise PreconditionError(f"block {(s, t)} needs {width} payload vectors, got {len(arr)}")
        entries = [np.zeros(n) for n in range(N + 1)]
        for n, v in zip(range(s, t + 1), arr):
            v = as_vector(v)
            if v.shape[0] > n:
                raise PreconditionError(f"payload at index {n} has length {v.shape[0]} > {n}")
            entries[n] = _pad(v, n)
        g = JVector(p, tuple(entries))
        _, chain = j_norm_with_chain(g)
        chains.append(_anchor_chain(g, chain, s - 1, t + 1))
        humps.append(g)
    return GlidingHumpFamily(tuple(humps), tuple(ranges), tuple(chains))


def _anchor_chain(g: JVector, chain: tuple, before: int, after: int) -> tuple:
    # Prepending a zero index adds ||x_first||^2 >= 0 and appending one leaves
    # the value unchanged, so an optimal chain can be moved to start at `before`
    # and end at `after`, both zero entries of g.
    inner = tuple(i for i in chain if before < i < after)
    anchored = (before,) + inner + (after,)
    if chain_value(g, anchored, max(after, g.N + 1)) + 1e-12 * (1 + 2 * j_norm(g) ** 2) < 2 * j_norm(g) ** 2:
        raise ConsistencyError("anchored hump chain lost value")
    return anchored


def unit_hump_payloads(ranges: Sequence) -> list:
    """Payload e_start on every index of each block: humps of J-norm 1."""
    out = []
    for s, _ in ranges:
        e = np.zeros(s)
        e[s - 1] = 1.0
        out.append(e)
    return out


def separated_blocks(r: int, width: int, first: int = 1, gap: int = 1) -> list:
    """r consecutive blocks of the given width separated by ``gap`` indices."""
    if width < 1 or gap < 1 or first < 1:
        raise PreconditionError("need width >= 1, gap >= 1 and first >= 1")
    return [(first + k * (width + gap), first + k * (width + gap) + width - 1) for k in range(r)]
