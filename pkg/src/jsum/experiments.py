"""Scripted desk-scale experiments that emit CSV rows plus a JSON summary."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from . import geometry, jspace, lp_space
from .errors import PreconditionError
from .geometry import SubspacePair, inclination, min_extension_norm
from .jspace import gliding_hump_family, j_norm, k_norm, sum_of_f, separated_blocks
from .lp_space import INF, Subspace, check_p, lp_norm, p_to_json

BOUND_SLACK = 1e-9
GROWTH_EXPONENT = 0.5
GROWTH_TOL = 0.05
ORACLE_TOL = 1e-8


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("JSUM_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    n = min(_threads(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if v == INF:
            return "inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _encode(values) -> str:
    return ";".join(repr(float(v)) for v in values)


def json_default(obj):
    # numpy scalars that slipped into a row or summary
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def decode_floats(text: str) -> list:
    return [float(t) for t in text.split(";")] if text else []


@dataclass
class ExperimentReport:
    name: str
    params: dict
    seed: int
    rows: list = field(default_factory=list)
    extremes: dict = field(default_factory=dict)
    defaults: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(row["pass"] for row in self.rows)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def columns(self) -> list:
        cols = []
        for row in self.rows:
            cols.extend(k for k in row if k not in cols)
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = self.columns()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in self.rows:
            writer.writerow([_fmt(row.get(c)) for c in cols])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "seed": self.seed,
            "verdict": self.verdict,
            "rows": len(self.rows),
            "extremes": self.extremes,
            "defaults": self.defaults,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, default=json_default)


def _defaults() -> dict:
    return {
        "bound_slack": BOUND_SLACK,
        "convex_tol": lp_space.DEFAULT_TOL,
        "convex_max_iter": lp_space.DEFAULT_MAX_ITER,
        "nonconvex_tol": geometry.NONCONVEX_TOL,
        "sobol_starts": geometry.SOBOL_STARTS,
        "random_starts": geometry.RANDOM_STARTS,
        "stabilization_window": jspace.STABILIZATION_WINDOW,
        "stabilization_tol": jspace.STABILIZATION_TOL,
        "jsum_threads": _threads(),
    }


# -- coefficient sums of f_i --------------------------------------------------


def coefficient_corners(max_len: int) -> list:
    spike_last = [0.0] * (max_len - 1) + [1.0]
    return [
        ("single-spike", [1.0]),
        ("all-ones", [1.0, 1.0]),
        ("single-spike", spike_last),
        ("all-ones", [1.0] * max_len),
        ("alternating", [(-1.0) ** i for i in range(max_len)]),
        ("zero", [0.0] * max_len),
    ]


def coefficient_sum_row(p: float, coeffs) -> dict:
    """One check of ||sum a_i f_i||_K / ||a||_p against [1, sqrt 2]."""
    a = np.asarray(coeffs, dtype=float)
    denom = lp_norm(a, p)
    row = {"length": len(a), "coeffs": _encode(a)}
    if denom == 0.0:
        row.update(k_norm=0.0, lp_norm=0.0, ratio=None, skipped=True)
        row["pass"] = True
        return row
    kn = k_norm(sum_of_f(a, p))
    ratio = kn / denom
    ok = 1.0 - BOUND_SLACK <= ratio <= math.sqrt(2.0) + BOUND_SLACK
    row.update(k_norm=kn, lp_norm=denom, ratio=ratio, skipped=False)
    row["pass"] = ok
    return row


def run_lemma2_bounds(p, trials: int = 200, max_len: int = 12, seed: int = 0) -> ExperimentReport:
    """Check 1 <= ||sum a_i f_i||_K / ||a||_p <= sqrt(2) for 1 < p < 2."""
    p = check_p(p)
    if not 1 < p < 2:
        raise PreconditionError(f"need 1 < p < 2, got {p}")
    if not 1 <= max_len <= 12:
        raise PreconditionError("max_len must be in [1, 12]")
    rng = np.random.default_rng(seed)
    cases = coefficient_corners(max_len)
    for _ in range(trials):
        length = int(rng.integers(1, max_len + 1))
        cases.append(("random", list(rng.uniform(-1.0, 1.0, length))))
    rows = _map(lambda c: coefficient_sum_row(p, c[1]), cases)
    for i, ((kind, _), row) in enumerate(zip(cases, rows)):
        rows[i] = {"trial": i, "kind": kind, **row}
    ratios = [r["ratio"] for r in rows if not r["skipped"]]
    report = ExperimentReport(
        name="lemma2",
        params={"p": p_to_json(p), "trials": trials, "max_len": max_len},
        seed=seed,
        rows=rows,
        extremes={"min_ratio": min(ratios), "max_ratio": max(ratios),
                  "skipped": sum(r["skipped"] for r in rows)},
        defaults=_defaults(),
    )
    return report


# -- gliding humps ------------------------------------------------------------


def hump_pattern(width: int, rng) -> np.ndarray:
    """Lower-triangular non-negative pattern; row j is the payload at offset j."""
    return np.tril(rng.uniform(0.0, 1.0, (width, width)))


def build_hump_family(r: int, p, width: int = 3, seed: int = 0):
    """r shifted copies of one random non-negative hump, blocks separated by one zero index.

    The payload at block index s + j is sum_l pattern[j, l] e_{s+l}.
    """
    rng = np.random.default_rng(seed)
    pattern = hump_pattern(width, rng)
    ranges = separated_blocks(r, width)
    payloads = []
    for s, _ in ranges:
        vecs = []
        for j in range(width):
            v = np.zeros(s + j)
            v[s - 1:s + j] = pattern[j, : j + 1]
            vecs.append(v)
        payloads.append(vecs)
    return gliding_hump_family(ranges, payloads, p)


def chain_estimate(family, coeffs, hump_norms=None) -> dict:
    """Both sides of 2 ||sum a_k g_k||_J^2 >= sum a_k^2 ||g_k||_K^2."""
    a = list(coeffs) + [0.0] * (len(family.humps) - len(coeffs))
    if hump_norms is None:
        hump_norms = [k_norm(g) for g in family.humps]
    n = j_norm(family.combination(a))
    rhs = float(sum(ak * ak * kn**2 for ak, kn in zip(a, hump_norms)))
    return {"j_norm": n, "lhs": 2.0 * n * n, "rhs": rhs, "unsquared_lhs": 2.0 * n,
            "unsquared_holds": bool(2.0 * n >= rhs - BOUND_SLACK), "pass": bool(2.0 * n * n >= rhs - BOUND_SLACK)}


def growth_exponent(r_values, norms) -> float:
    return float(np.polyfit(np.log(r_values), np.log(norms), 1)[0])


def run_theorem7_growth(p, r_max: int = 10, seed: int = 0, trials: int = 100, width: int = 3) -> ExperimentReport:
    """Chain estimate for gliding humps and the growth rate of ||g_1 + ... + g_r||."""
    p = check_p(p)
    if not p > 2:
        raise PreconditionError(f"need p > 2, got {p}")
    if not 2 <= r_max <= 10:
        raise PreconditionError("r_max must be in [2, 10]")
    family = build_hump_family(r_max, p, width, seed)
    norms = [k_norm(g) for g in family.humps]
    rows = []
    for r in range(1, r_max + 1):
        est = chain_estimate(family, [1.0] * r, norms)
        rows.append({"trial": len(rows), "kind": "growth", "r": r, "coeffs": _encode([1.0] * r), **est})
    expo = growth_exponent([row["r"] for row in rows], [row["j_norm"] for row in rows])
    rng = np.random.default_rng(seed + 1)
    draws = []
    for _ in range(trials):
        r = int(rng.integers(1, r_max + 1))
        draws.append(list(rng.uniform(-1.0, 1.0, r)))
    ests = _map(lambda a: chain_estimate(family, a, norms), draws)
    for a, est in zip(draws, ests):
        rows.append({"trial": len(rows), "kind": "random", "r": len(a), "coeffs": _encode(a), **est})
    rows.append({"trial": len(rows), "kind": "exponent", "r": r_max, "exponent": expo,
                 "pass": bool(expo >= GROWTH_EXPONENT - GROWTH_TOL)})
    slack = [row["lhs"] - row["rhs"] for row in rows if "lhs" in row]
    return ExperimentReport(
        name="theorem7",
        params={"p": p_to_json(p), "r_max": r_max, "trials": trials, "width": width},
        seed=seed,
        rows=rows,
        extremes={"exponent": expo, "min_slack": float(min(slack)),
                  "unsquared_failures": sum(not row.get("unsquared_holds", True) for row in rows),
                  "hump_k_norms": norms},
        defaults=_defaults(),
    )


# -- subspace experiments -----------------------------------------------------


def run_coordinate_pairs(p, n_max: int = 8) -> ExperimentReport:
    """Extension norms of (span e_1..e_i, span e_1..e_{i+1}) for i = 1..n_max."""
    p = check_p(p)
    if not 1 <= n_max <= 12:
        raise PreconditionError("n_max must be in [1, 12]")
    ambient = n_max + 1

    def one(i):
        pair = SubspacePair(Subspace.coordinate(range(i), ambient), Subspace.coordinate(range(i + 1), ambient), p)
        b = min_extension_norm(pair)
        return {"index": i, "lower": b.lower, "upper": b.upper, "certified_lower": b.certified_lower,
                "certified_upper": b.certified_upper, "pass": b.upper <= 1.0 + BOUND_SLACK}

    rows = _map(one, range(1, n_max + 1))
    return ExperimentReport(
        name="coordinate_pairs",
        params={"p": p_to_json(p), "n_max": n_max},
        seed=0,
        rows=rows,
        extremes={"max_upper": max(r["upper"] for r in rows)},
        defaults=_defaults(),
    )


def principal_angle_oracle(U: Subspace, V: Subspace) -> float:
    """l_2 inclination as the sine of the smallest principal angle."""
    return float(np.sin(np.min(subspace_angles(U.matrix, V.matrix))))


def family_pairs(family: dict, seed: int = 0) -> list:
    """Expand a family description into ``(parameter, U, V)`` triples.

    Kinds: ``rotation`` (U = span(cos t e_1 + sin t e_2), V = span(e_1), with
    ``angles`` or ``count`` evenly spaced angles in [0, pi/2]), ``nested``
    (random U inside random V) and ``random`` (independent random U, V);
    the last two take ``count``, ``ambient_dim`` and ``dims = [dim U, dim V]``.
    """
    if not isinstance(family, dict) or "kind" not in family:
        raise PreconditionError("family must be a mapping with a 'kind'")
    kind = family["kind"]
    n = int(family.get("ambient_dim", 2))
    if kind == "rotation":
        if n < 2:
            raise PreconditionError("rotation family needs ambient_dim >= 2")
        angles = family.get("angles")
        if angles is None:
            count = int(family.get("count", 20))
            angles = np.linspace(0.0, np.pi / 2, count).tolist()
        e = np.eye(n)
        return [(float(t), Subspace(np.cos(t) * e[0] + np.sin(t) * e[1]), Subspace(e[0])) for t in angles]
    if kind in ("nested", "random"):
        try:
            k, l = (int(d) for d in family["dims"])
            count = int(family["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise PreconditionError(f"malformed family: {exc}") from None
        if not (1 <= k <= n and 1 <= l <= n) or (kind == "nested" and k > l):
            raise PreconditionError("family dimensions out of range")
        rng = np.random.default_rng(seed)
        out = []
        for i in range(count):
            V = Subspace(rng.standard_normal((l, n)))
            if kind == "nested":
                U = Subspace(rng.standard_normal((k, l)) @ V.basis)
            else:
                U = Subspace(rng.standard_normal((k, n)))
            out.append((float(i), U, V))
        return out
    raise PreconditionError(f"unknown family kind {kind!r}")


def run_inclination_sweep(family: dict, p_list, seed: int = 0) -> ExperimentReport:
    """Inclination bounds over a subspace family; p = 2 is checked against principal angles."""
    ps = [check_p(p) for p in p_list]
    if not ps:
        raise PreconditionError("need at least one exponent")
    triples = family_pairs(family, seed)
    nested = family["kind"] == "nested"
    jobs = [(idx, t, U, V, p) for idx, (t, U, V) in enumerate(triples) for p in ps]

    def one(job):
        idx, t, U, V, p = job
        b = inclination(U, V, p, seed=seed)
        row = {"index": idx, "param": t, "p": p, "lower": b.lower, "upper": b.upper,
               "certified_lower": b.certified_lower, "certified_upper": b.certified_upper, "oracle": None}
        ok = b.lower <= b.upper + 1e-12 and b.upper <= 1.0 + 1e-12
        if p == 2:
            row["oracle"] = principal_angle_oracle(U, V)
            ok = ok and abs(b.upper - row["oracle"]) <= ORACLE_TOL and abs(b.lower - row["oracle"]) <= ORACLE_TOL
        if nested:
            ok = ok and b.upper <= 1e-9
        row["pass"] = ok
        return row

    rows = _map(one, jobs)
    return ExperimentReport(
        name="inclination_sweep",
        params={"family": family, "p_list": [p_to_json(p) for p in ps]},
        seed=seed,
        rows=rows,
        extremes={"max_upper": max(r["upper"] for r in rows), "min_upper": min(r["upper"] for r in rows)},
        defaults=_defaults(),
    )


def run_rosenthal_table(i_max: int = 6, N: int | None = None, p=1.5, seed: int = 0) -> ExperimentReport:
    """Banach-Mazur estimates and projection-norm bounds for the W_i test family.

    Qualitative only: nothing here can certify non-uniform approximability.
    """
    p = check_p(p)
    N = 2 * i_max * (i_max + 1) // 2 if N is None else N
    Ws = geometry.rosenthal_like_subspaces(i_max, N, p, seed)
    pairs = [SubspacePair(W, W, p) for W in Ws]
    report = geometry.uniform_approximability_report(pairs, seed=seed)
    rows = []
    for i, (W, b) in enumerate(zip(Ws, report.bounds), start=1):
        d = geometry.bm_distance_to_l2(W, p, seed)
        rows.append({"index": i, "dim": W.dim, "bm_lower": d.lower, "bm_upper": d.upper,
                     "ext_lower": b.lower, "ext_upper": b.upper, "ext_certified_lower": b.certified_lower,
                     "pass": 1.0 - 1e-12 <= b.lower <= b.upper + 1e-12})
    return ExperimentReport(
        name="rosenthal",
        params={"i_max": i_max, "N": N, "p": p_to_json(p)},
        seed=seed,
        rows=rows,
        extremes={"sup_upper": report.sup_upper, "lower_nondecreasing": report.lower_nondecreasing,
                  "lower_slope": report.lower_slope},
        defaults=_defaults(),
    )


EXPERIMENTS = {
    "lemma2": run_lemma2_bounds,
    "theorem7": run_theorem7_growth,
    "coordinate_pairs": run_coordinate_pairs,
    "inclination_sweep": run_inclination_sweep,
    "rosenthal": run_rosenthal_table,
}
