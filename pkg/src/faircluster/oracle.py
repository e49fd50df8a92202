"""Independent brute-force oracles and the almost-fair LP lower bound.

These exist to check the main pipeline, so they deliberately share as little
code with it as possible: optima come from exhaustive enumeration of center
subsets and assignment maps (vectorized over chunks of the assignment space),
and the almost-fair LP re-derives a cost floor for any clustering within a
given additive fairness violation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .instance import ClusteringInstance, FairnessProfile
from .lp import LpModel, LpStatus, SolverError, solve_lp

DEFAULT_GUARD = 10_000_000
_CHUNK = 1 << 15
_EPS = 1e-9


class GuardExceededError(ValueError):
    """Enumeration would visit more states than the caller allowed."""


@dataclass(frozen=True)
class OracleResult:
    """Optima found by exhaustive search; any subset of fields may be populated.

    Infeasible fair/lower-bounded problems carry +inf. Witnesses are
    (opened, phi) pairs.
    """

    opt_vnll: float | None = None
    opt_fair: float | None = None
    opt_asgn: float | None = None
    opt_lbnd: float | None = None
    witness_vnll: tuple[tuple[int, ...], np.ndarray] | None = None
    witness_fair: tuple[tuple[int, ...], np.ndarray] | None = None
    witness_asgn: tuple[tuple[int, ...], np.ndarray] | None = None
    witness_lbnd: tuple[tuple[int, ...], np.ndarray] | None = None

    def __post_init__(self):
        if self.opt_vnll is not None and self.opt_fair is not None:
            if self.opt_vnll > self.opt_fair + 1e-9:
                raise ValueError("opt_vnll must never exceed opt_fair")

    @property
    def fair_infeasible(self) -> bool:
        return self.opt_fair is not None and math.isinf(self.opt_fair)


def _estimate_states(m: int, k: int, n: int) -> float:
    return math.comb(m, k) * float(k) ** n


def _assignment_chunks(s: int, n: int):
    """Yield (count, digits) blocks covering all s^n assignment maps.

    digits is a (count, n) uint8 array; column j holds the facility position
    client j is assigned to.
    """
    total = s**n
    pows = (s ** np.arange(n, dtype=np.int64)).astype(np.int64)
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        codes = np.arange(lo, hi, dtype=np.int64)
        digits = ((codes[:, None] // pows[None, :]) % s).astype(np.uint8)
        yield digits


def _chunk_costs(digits: np.ndarray, dsub: np.ndarray, p: float) -> np.ndarray:
    n = digits.shape[1]
    gathered = dsub[np.arange(n)[None, :], digits]
    if math.isinf(p):
        return gathered.max(axis=1)
    return (gathered**p).sum(axis=1)


def _chunk_violations(digits: np.ndarray, membership: np.ndarray,
                      profile: FairnessProfile, s: int) -> np.ndarray:
    """Max additive violation per enumerated assignment (vectorized).

    Depends only on the assignment pattern and the group structure, never on
    which facilities realize the positions, so callers can reuse it across
    every same-size facility subset.
    """
    chunk = digits.shape[0]
    lam = np.zeros(chunk)
    for j in range(s):
        onehot = digits == j
        size = onehot.sum(axis=1)
        for i in range(len(profile)):
            cnt = onehot[:, membership[:, i]].sum(axis=1)
            lam = np.maximum(lam, cnt - profile.alpha[i] * size)
            lam = np.maximum(lam, profile.beta[i] * size - cnt)
    return np.maximum(lam, 0.0)


def brute_force_assignment(instance: ClusteringInstance, opened,
                           profile: FairnessProfile, p: float | None = None,
                           lam: float = 0.0,
                           max_size_guard: int = DEFAULT_GUARD) -> OracleResult:
    """Exhaustive fair-assignment optimum on fixed centers, allowing up to
    ``lam`` additive violation (0 = exactly fair)."""
    if p is None:
        p = instance.p
    opened = tuple(sorted(dict.fromkeys(int(f) for f in opened)))
    s, n = len(opened), instance.n
    states = float(s) ** n
    if states > max_size_guard:
        raise GuardExceededError(f"{states:.3g} assignments exceed guard {max_size_guard}")
    dsub = instance.dist_cf[:, list(opened)]

    best = math.inf
    best_digits = None
    for digits in _assignment_chunks(s, n):
        costs = _chunk_costs(digits, dsub, p)
        viol = _chunk_violations(digits, instance.membership, profile, s)
        ok = viol <= lam + _EPS
        if ok.any():
            idx = np.flatnonzero(ok)
            j = idx[np.argmin(costs[idx])]
            if costs[j] < best:
                best = float(costs[j])
                best_digits = digits[j].copy()

    if best_digits is None:
        return OracleResult(opt_asgn=math.inf)
    phi = np.asarray([opened[j] for j in best_digits], dtype=int)
    value = best if math.isinf(p) else best ** (1.0 / p)
    return OracleResult(opt_asgn=float(value), witness_asgn=(opened, phi))


def brute_force_fair(instance: ClusteringInstance, profile: FairnessProfile,
                     max_size_guard: int = DEFAULT_GUARD) -> OracleResult:
    """Enumerate every center set of size <= k and every assignment map;
    record the overall optimum (opt_vnll) and the exactly-fair optimum
    (opt_fair, +inf when no exactly-fair assignment exists)."""
    n, m, k, p = instance.n, instance.m, instance.k, instance.p
    states = _estimate_states(m, k, n)
    if states > max_size_guard:
        raise GuardExceededError(
            f"about {states:.3g} states (C({m},{k}) * {k}^{n}) exceed guard {max_size_guard}"
        )

    best_any, best_fair = math.inf, math.inf
    wit_any, wit_fair = None, None
    for size in range(1, k + 1):
        subsets = list(itertools.combinations(range(m), size))
        dsubs = [instance.dist_cf[:, list(S)] for S in subsets]
        for digits in _assignment_chunks(size, n):
            # the fairness mask is independent of which facilities fill the
            # positions, so compute it once and reuse for every subset
            viol = _chunk_violations(digits, instance.membership, profile, size)
            ok_idx = np.flatnonzero(viol <= _EPS)
            for S, dsub in zip(subsets, dsubs):
                costs = _chunk_costs(digits, dsub, p)
                j_any = int(np.argmin(costs))
                if costs[j_any] < best_any:
                    best_any = float(costs[j_any])
                    wit_any = (S, digits[j_any].copy())
                if ok_idx.size:
                    j = ok_idx[np.argmin(costs[ok_idx])]
                    if costs[j] < best_fair:
                        best_fair = float(costs[j])
                        wit_fair = (S, digits[j].copy())

    def finish(val, wit):
        if wit is None:
            return math.inf, None
        S, digits = wit
        phi = np.asarray([S[d] for d in digits], dtype=int)
        v = val if math.isinf(p) else val ** (1.0 / p)
        return float(v), (tuple(S), phi)

    vnll, wv = finish(best_any, wit_any)
    fair, wf = finish(best_fair, wit_fair)
    return OracleResult(opt_vnll=vnll, opt_fair=fair,
                        witness_vnll=wv, witness_fair=wf)


def brute_force_lower_bounded(instance: ClusteringInstance, L: int,
                              max_size_guard: int = DEFAULT_GUARD) -> OracleResult:
    """Exhaustive optimum over center sets and assignments where every opened
    facility serves at least L clients."""
    n, m, k, p = instance.n, instance.m, instance.k, instance.p
    states = _estimate_states(m, k, n)
    if states > max_size_guard:
        raise GuardExceededError(f"about {states:.3g} states exceed guard {max_size_guard}")

    best, wit = math.inf, None
    for size in range(1, k + 1):
        if size * L > n:
            continue
        subsets = list(itertools.combinations(range(m), size))
        dsubs = [instance.dist_cf[:, list(S)] for S in subsets]
        for digits in _assignment_chunks(size, n):
            sizes = np.stack([(digits == j).sum(axis=1) for j in range(size)], axis=1)
            ok_idx = np.flatnonzero((sizes >= L).all(axis=1))
            if not ok_idx.size:
                continue
            for S, dsub in zip(subsets, dsubs):
                costs = _chunk_costs(digits, dsub, p)
                j = ok_idx[np.argmin(costs[ok_idx])]
                if costs[j] < best:
                    best = float(costs[j])
                    wit = (S, digits[j].copy())
    if wit is None:
        return OracleResult(opt_lbnd=math.inf)
    S, digits = wit
    phi = np.asarray([S[d] for d in digits], dtype=int)
    value = best if math.isinf(p) else best ** (1.0 / p)
    return OracleResult(opt_lbnd=float(value), witness_lbnd=(tuple(S), phi))


def almost_fair_lp(instance: ClusteringInstance, profile: FairnessProfile,
                   lam: float, p: float | None = None) -> float:
    """Cost lower bound for any clustering whose additive violation is <= lam.

    Solves the center-opening relaxation over all of F: assignment variables
    coupled to opening variables y_f with sum y_f <= k, and fairness rows
    relaxed additively by lam. Returns objective^(1/p). Fractional only; the
    value is used as a floor, never rounded into a clustering.
    """
    if p is None:
        p = instance.p
    if math.isinf(p):
        raise ValueError("the almost-fair LP needs finite p")
    n, m, k = instance.n, instance.m, instance.k
    d = instance.dist_cf
    dmax = float(d.max())
    scale = 2.0 ** math.ceil(math.log2(dmax)) if dmax > 0 else 1.0
    cost = (d / scale) ** p

    model = LpModel(objective_scale=scale**p)
    # x variables first (v major), then y
    for v in range(n):
        for f in range(m):
            model.add_variable(0.0, 1.0, float(cost[v, f]))
    y0 = model.num_vars
    for _ in range(m):
        model.add_variable(0.0, 1.0, 0.0)

    for v in range(n):
        model.add_constraint(np.arange(v * m, (v + 1) * m), np.ones(m), "==", 1.0)
    for v in range(n):
        for f in range(m):
            model.add_constraint([v * m + f, y0 + f], [1.0, -1.0], "<=", 0.0)
    model.add_constraint(np.arange(y0, y0 + m), np.ones(m), "<=", float(k))
    mem = instance.membership
    for f in range(m):
        cols = np.arange(f, n * m, m)
        for i in range(instance.ell):
            mi = mem[:, i].astype(float)
            model.add_constraint(cols, mi - profile.alpha[i], "<=", lam)
            model.add_constraint(cols, profile.beta[i] - mi, "<=", lam)

    sol = solve_lp(model)
    if sol.status is not LpStatus.OPTIMAL:
        raise SolverError(f"almost-fair LP ended {sol.status.value}")
    return float(max(sol.objective, 0.0) ** (1.0 / p))
