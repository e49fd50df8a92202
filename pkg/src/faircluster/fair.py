"""Fair clustering via LP relaxation and iterative rounding.

Pipeline: a vanilla solver fixes the opened centers S, then the fair
assignment problem on S is relaxed to an LP over x_{v,f}. Integral values
are fixed, the rest is re-solved under floor/ceil cluster-load windows
(per facility and per facility-group pair), dropping any window whose
fractional support falls to 2(Delta+1) or below, until every client is
fixed. The result violates each fairness constraint by at most 4*Delta + 3
additively and costs no more than the initial LP optimum.

For the bottleneck norm (p = inf) there is no linear objective; instead the
optimum radius is guessed by binary search over the pairwise distances and
a feasibility LP restricted to in-range pairs is rounded the same way.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .instance import (
    Assignment,
    ClusteringInstance,
    FairnessProfile,
    FairnessReport,
    additive_violation,
    build_report,
    nearest_assignment,
)
from .lp import INTEGRALITY_TOL, LpModel, LpSolution, LpStatus, SolverError, check_feasible, solve_lp
from .vanilla import SolverId, VanillaSolution, solve_vanilla

CONSERVATION_TOL = 1e-7
_T_SNAP = 1e-7  # fractional loads this close to an integer are treated as integral


class FairnessInfeasibleError(ValueError):
    """The aggregate group ratios rule out any (even fractional) fair assignment."""


def _raise_infeasible(instance: ClusteringInstance, profile: FairnessProfile) -> None:
    r = instance.group_ratios
    for i in range(instance.ell):
        if not (profile.beta[i] - 1e-12 <= r[i] <= profile.alpha[i] + 1e-12):
            raise FairnessInfeasibleError(
                f"group {i} has dataset ratio {r[i]:.6f} outside "
                f"[beta={profile.beta[i]:.6f}, alpha={profile.alpha[i]:.6f}]; "
                "no assignment can satisfy the profile in aggregate"
            )
    raise SolverError("fair-assignment LP reported infeasible but aggregate ratios admit "
                      "the proportional solution; solver contract violated")


@dataclass(frozen=True)
class FairAssignmentProblem:
    """Fair p-assignment instance: clients of ``instance`` against fixed centers."""

    instance: ClusteringInstance
    opened: tuple[int, ...]
    profile: FairnessProfile
    p: float | None = None

    def __post_init__(self):
        opened = tuple(sorted(dict.fromkeys(self.opened)))
        object.__setattr__(self, "opened", opened)
        if not opened:
            raise ValueError("opened set must be nonempty")
        if not all(0 <= f < self.instance.m for f in opened):
            raise ValueError("opened contains an unknown facility")
        if len(self.profile) != self.instance.ell:
            raise ValueError("profile length must match the number of groups")
        if self.p is None:
            object.__setattr__(self, "p", self.instance.p)

    @property
    def dist(self) -> np.ndarray:
        """(n, |S|) distances restricted to opened facilities."""
        return self.instance.dist_cf[:, list(self.opened)]


def _pow2_scale(dmax: float) -> float:
    """Power-of-two scale ~ dmax, so scaled distances stay near [0, 1]."""
    if dmax <= 0:
        return 1.0
    return float(2.0 ** math.ceil(math.log2(dmax)))


def _pair_cost(problem: FairAssignmentProblem):
    """Scaled per-pair objective coefficients: ((d/s)^p, s^p)."""
    d = problem.dist
    scale = _pow2_scale(float(d.max()))
    return (d / scale) ** problem.p, scale**problem.p


def build_fair_lp(problem: FairAssignmentProblem) -> LpModel:
    """The fair-assignment relaxation: minimize sum d(v,f)^p x_{v,f} over x in [0,1]
    with per-(facility, group) ratio rows and one-assignment rows per client.

    Distances are pre-scaled by a power of two for conditioning; the model's
    ``objective_scale`` restores reported objectives to d^p units.
    """
    if math.isinf(problem.p):
        raise ValueError("p = inf has no linear objective; use build_fair_feasibility_lp")
    cost, scale_p = _pair_cost(problem)
    n, s = cost.shape
    model = LpModel(objective_scale=scale_p)
    for v in range(n):
        for j in range(s):
            model.add_variable(0.0, 1.0, float(cost[v, j]))
    _add_fairness_rows(model, problem, lambda v, j: v * s + j, np.arange(n))
    for v in range(n):
        model.add_constraint(np.arange(v * s, v * s + s), np.ones(s), "==", 1.0)
    return model


def _add_fairness_rows(model: LpModel, problem: FairAssignmentProblem,
                       var_of, clients: np.ndarray, lam: float = 0.0) -> None:
    """Two rows per (facility, group): counts within [beta - lam, alpha + lam] share."""
    inst = problem.instance
    s = len(problem.opened)
    for j in range(s):
        cols = np.array([var_of(v, j) for v in clients])
        live = cols >= 0
        cols = cols[live]
        sub = clients[live]
        if cols.size == 0:
            continue
        member = inst.membership[sub]  # (|sub|, ell)
        for i in range(inst.ell):
            a, b = problem.profile.alpha[i], problem.profile.beta[i]
            mi = member[:, i].astype(float)
            model.add_constraint(cols, mi - a, "<=", lam)
            model.add_constraint(cols, b - mi, "<=", lam)


def feasible_pairs(problem: FairAssignmentProblem, guess: float) -> list[tuple[int, int]]:
    """(client, opened-position) pairs within the radius guess, row-major order."""
    d = problem.dist
    n, s = d.shape
    return [(v, j) for v in range(n) for j in range(s) if d[v, j] <= guess]


def build_fair_feasibility_lp(problem: FairAssignmentProblem, guess: float) -> LpModel:
    """Feasibility system for p = inf: same rows as the fair LP but no objective,
    with variables only for pairs at distance <= guess."""
    d = problem.dist
    n, s = d.shape
    model = LpModel()
    var_id = -np.ones((n, s), dtype=int)
    for v, j in feasible_pairs(problem, guess):
        var_id[v, j] = model.add_variable(0.0, 1.0, 0.0)
    _add_fairness_rows(model, problem, lambda v, j: int(var_id[v, j]), np.arange(n))
    for v in range(n):
        cols = var_id[v][var_id[v] >= 0]
        if cols.size == 0:
            # client out of range of every facility: infeasible by construction
            model.add_constraint([], [], ">=", 1.0)
        else:
            model.add_constraint(cols, np.ones(cols.size), "==", 1.0)
    return model


def _snap_floor(x: float) -> int:
    return math.floor(x + _T_SNAP)


def _snap_ceil(x: float) -> int:
    return math.ceil(x - _T_SNAP)


@dataclass
class RoundingState:
    """Mutable working state of the iterative rounding loop.

    ``pairs`` lists surviving (client, opened-position) variables with current
    fractional values ``x``. ``t_f`` / ``t_fi`` carry the residual loads that
    define the floor/ceil windows; active flags track which windows remain.
    """

    problem: FairAssignmentProblem
    fixed: dict[int, int]                 # client -> facility id
    pairs: list[tuple[int, int]]
    x: np.ndarray
    t_f: np.ndarray                       # (s,) residual loads (decremented on fixes)
    t_fi: np.ndarray                      # (s, ell)
    active_f: np.ndarray                  # (s,) bool
    active_fi: np.ndarray                 # (s, ell) bool
    t_f0: np.ndarray | None = None        # loads at loop entry (window reference)
    t_fi0: np.ndarray | None = None
    prefixed: frozenset[int] = frozenset()  # clients integral before the loop
    iteration: int = 0
    history: list[dict] = field(default_factory=list)

    def unfixed_clients(self) -> list[int]:
        return sorted({v for v, _ in self.pairs})

    def conservation_error(self) -> float:
        sums: dict[int, float] = {}
        for (v, _), val in zip(self.pairs, self.x):
            sums[v] = sums.get(v, 0.0) + val
        if not sums:
            return 0.0
        return max(abs(t - 1.0) for t in sums.values())


def _init_state(problem: FairAssignmentProblem, lp_solution: LpSolution,
                layout: list[tuple[int, int]] | None = None) -> RoundingState:
    inst = problem.instance
    n, s = inst.n, len(problem.opened)
    values = np.asarray(lp_solution.values, dtype=float)
    if layout is None:
        layout = [(v, j) for v in range(n) for j in range(s)]
    if len(layout) != values.size:
        raise ValueError("variable layout does not match the LP solution size")
    by_client: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for (v, j), val in zip(layout, values):
        by_client[v].append((j, float(val)))

    fixed: dict[int, int] = {}
    pairs: list[tuple[int, int]] = []
    vals: list[float] = []
    for v in range(n):
        if not by_client[v]:
            raise ValueError(f"client {v} has no variable in the LP layout")
        j_one, x_one = max(by_client[v], key=lambda e: e[1])
        if x_one >= 1.0 - INTEGRALITY_TOL:
            fixed[v] = problem.opened[j_one]
            continue
        for j, val in by_client[v]:
            if val > INTEGRALITY_TOL:
                pairs.append((v, j))
                vals.append(val)

    x = np.asarray(vals, dtype=float)
    t_f = np.zeros(s)
    t_fi = np.zeros((s, inst.ell))
    for (v, j), val in zip(pairs, x):
        t_f[j] += val
        t_fi[j] += val * inst.membership[v]
    return RoundingState(
        problem=problem, fixed=fixed, pairs=pairs, x=x, t_f=t_f, t_fi=t_fi,
        active_f=np.ones(s, dtype=bool),
        active_fi=np.ones((s, inst.ell), dtype=bool),
        t_f0=t_f.copy(), t_fi0=t_fi.copy(), prefixed=frozenset(fixed),
    )


def _build_lp2(state: RoundingState) -> LpModel:
    """LP2 over the surviving variables: objective as the fair LP, plus
    floor/ceil load windows for every still-active facility / (facility, group) row."""
    problem = state.problem
    inst = problem.instance
    s = len(problem.opened)
    if math.isinf(problem.p):
        cost, scale_p = None, 1.0
    else:
        cost, scale_p = _pair_cost(problem)
    model = LpModel(objective_scale=scale_p)
    for (v, j) in state.pairs:
        model.add_variable(0.0, 1.0, 0.0 if cost is None else float(cost[v, j]))

    col_vars: list[list[int]] = [[] for _ in range(s)]
    col_clients: list[list[int]] = [[] for _ in range(s)]
    row_vars: dict[int, list[int]] = {}
    for idx, (v, j) in enumerate(state.pairs):
        col_vars[j].append(idx)
        col_clients[j].append(v)
        row_vars.setdefault(v, []).append(idx)

    for j in range(s):
        if not col_vars[j]:
            continue
        cols = np.asarray(col_vars[j])
        ones = np.ones(cols.size)
        if state.active_f[j]:
            model.add_constraint(cols, ones, ">=", float(_snap_floor(state.t_f[j])))
            model.add_constraint(cols, ones, "<=", float(_snap_ceil(state.t_f[j])))
        member = inst.membership[col_clients[j]]
        for i in range(inst.ell):
            if not state.active_fi[j, i]:
                continue
            sel = member[:, i]
            if not sel.any():
                continue
            gcols = cols[sel]
            gones = np.ones(gcols.size)
            model.add_constraint(gcols, gones, ">=", float(_snap_floor(state.t_fi[j, i])))
            model.add_constraint(gcols, gones, "<=", float(_snap_ceil(state.t_fi[j, i])))
    for v, cols in sorted(row_vars.items()):
        c = np.asarray(cols)
        model.add_constraint(c, np.ones(c.size), "==", 1.0)
    return model


@dataclass(frozen=True)
class FairAssignmentResult:
    """Output of iterative rounding: the integral assignment plus diagnostics."""

    assignment: Assignment
    lambda_observed: float
    rounding_iterations: int
    initial_lp_objective: float | None    # sum d^p units; None for p = inf
    lp2_objectives: tuple[float, ...]
    state: RoundingState
    guess: float | None = None            # p = inf only: the G* radius


def iterative_round(problem: FairAssignmentProblem, lp_solution: LpSolution,
                    layout: list[tuple[int, int]] | None = None) -> FairAssignmentResult:
    """Round a basic optimal LP solution to an integral fair-ish assignment.

    The loop: fix integral values, rebuild the floor/ceil window LP over
    the fractional support, and at each vertex
    delete zeros, fix ones (decrementing the residual loads), then drop any
    per-(facility, group) row and then any per-facility row whose strictly
    fractional support is at most 2(Delta+1); re-solve and repeat. A pass
    that makes no progress means the solver returned a non-vertex point and
    raises SolverError.
    """
    if lp_solution.status is not LpStatus.OPTIMAL:
        raise ValueError("iterative_round needs an OPTIMAL basic solution")
    inst = problem.instance
    state = _init_state(problem, lp_solution, layout)
    drop_support = 2 * (inst.delta + 1)
    lp2_objectives: list[float] = []

    max_iters = len(state.pairs) + 2 * len(problem.opened) * (inst.ell + 1) + inst.n + 2
    while state.pairs:
        if state.iteration >= max_iters:
            raise SolverError("iterative rounding exceeded its iteration budget")
        state.iteration += 1
        model = _build_lp2(state)
        sol = solve_lp(model)
        if sol.status is not LpStatus.OPTIMAL:
            raise SolverError(f"LP2 became {sol.status.value}; rounding invariant broken")
        lp2_objectives.append(sol.objective)
        state.x = np.asarray(sol.values, dtype=float)

        keep: list[int] = []
        newly_fixed: list[tuple[int, int]] = []
        fixed_clients: set[int] = set()
        for idx, (v, j) in enumerate(state.pairs):
            if state.x[idx] <= INTEGRALITY_TOL:
                continue
            if state.x[idx] >= 1.0 - INTEGRALITY_TOL and v not in fixed_clients:
                newly_fixed.append((v, j))
                fixed_clients.add(v)
                continue
            keep.append(idx)
        for v, j in newly_fixed:
            state.fixed[v] = problem.opened[j]
            state.t_f[j] -= 1.0
            state.t_fi[j] -= inst.membership[v]
        keep = [idx for idx in keep if state.pairs[idx][0] not in fixed_clients]
        progressed = len(keep) < len(state.pairs)
        state.pairs = [state.pairs[idx] for idx in keep]
        state.x = state.x[keep]

        # support of strictly fractional variables per row, post clean-up
        s = len(problem.opened)
        sup_f = np.zeros(s, dtype=int)
        sup_fi = np.zeros((s, inst.ell), dtype=int)
        for (v, j) in state.pairs:
            sup_f[j] += 1
            sup_fi[j] += inst.membership[v]
        dropped = 0
        for j in range(s):
            for i in range(inst.ell):
                if state.active_fi[j, i] and sup_fi[j, i] <= drop_support:
                    state.active_fi[j, i] = False
                    dropped += 1
        for j in range(s):
            if state.active_f[j] and sup_f[j] <= drop_support:
                state.active_f[j] = False
                dropped += 1
        progressed = progressed or dropped > 0

        state.history.append({
            "iteration": state.iteration,
            "lp2_objective": sol.objective,
            "fixed_total": len(state.fixed),
            "surviving_vars": len(state.pairs),
            "rows_dropped": dropped,
            "conservation_error": state.conservation_error(),
        })
        if not progressed:
            frac = sorted(state.pairs)
            raise SolverError(
                "iterative rounding stalled: no variable fixed and no row dropped; "
                f"fractional support {frac[:20]}{'...' if len(frac) > 20 else ''}"
            )

    if len(state.fixed) != inst.n:
        missing = sorted(set(range(inst.n)) - set(state.fixed))
        raise SolverError(f"rounding finished with unassigned clients {missing[:10]}")
    phi = np.empty(inst.n, dtype=int)
    for v, f in state.fixed.items():
        phi[v] = f
    assignment = Assignment(inst, problem.opened, phi)
    lam = additive_violation(inst, problem.profile, assignment)
    initial_obj = None if math.isinf(problem.p) else lp_solution.objective
    return FairAssignmentResult(
        assignment=assignment, lambda_observed=lam,
        rounding_iterations=state.iteration,
        initial_lp_objective=initial_obj,
        lp2_objectives=tuple(lp2_objectives),
        state=state,
    )


def fair_assign_k_center(problem: FairAssignmentProblem) -> FairAssignmentResult:
    """Bottleneck fair assignment: binary search the smallest fractionally
    feasible radius G* over the client-facility distance multiset, then round
    any feasible vertex at G*. Every assigned distance ends up <= G*."""
    if not math.isinf(problem.p):
        raise ValueError("fair_assign_k_center is the p = inf path")
    inst = problem.instance
    d = problem.dist
    if problem.profile.is_vacuous:
        phi = nearest_assignment(inst, problem.opened)
        assignment = Assignment(inst, problem.opened, phi)
        guess = float(np.max(inst.dist_cf[np.arange(inst.n), phi]))
        return FairAssignmentResult(
            assignment=assignment, lambda_observed=0.0, rounding_iterations=0,
            initial_lp_objective=None, lp2_objectives=(),
            state=_trivial_state(problem, phi), guess=guess,
        )

    values = np.unique(d)
    # a radius below the largest nearest-facility distance strands a client
    lo = int(np.searchsorted(values, d.min(axis=1).max()))
    hi = len(values) - 1
    if not check_feasible(build_fair_feasibility_lp(problem, float(values[hi]))):
        _raise_infeasible(inst, problem.profile)
    feasible_idx = hi
    while lo < feasible_idx:
        mid = (lo + feasible_idx) // 2
        if check_feasible(build_fair_feasibility_lp(problem, float(values[mid]))):
            feasible_idx = mid
        else:
            lo = mid + 1
    guess = float(values[feasible_idx])
    sol = solve_lp(build_fair_feasibility_lp(problem, guess))
    result = iterative_round(problem, sol, layout=feasible_pairs(problem, guess))
    dmax = float(np.max(d[np.arange(inst.n), [problem.opened.index(f) for f in result.assignment.phi]]))
    if dmax > guess + 1e-9:
        raise SolverError(f"rounded radius {dmax} exceeds feasible guess {guess}")
    return FairAssignmentResult(
        assignment=result.assignment, lambda_observed=result.lambda_observed,
        rounding_iterations=result.rounding_iterations,
        initial_lp_objective=None, lp2_objectives=result.lp2_objectives,
        state=result.state, guess=guess,
    )


def _trivial_state(problem: FairAssignmentProblem, phi: np.ndarray) -> RoundingState:
    s = len(problem.opened)
    ell = problem.instance.ell
    return RoundingState(
        problem=problem, fixed={v: int(f) for v, f in enumerate(phi)},
        pairs=[], x=np.zeros(0), t_f=np.zeros(s), t_fi=np.zeros((s, ell)),
        active_f=np.zeros(s, dtype=bool), active_fi=np.zeros((s, ell), dtype=bool),
    )


def fair_assignment(problem: FairAssignmentProblem) -> FairAssignmentResult:
    """Solve the fair p-assignment problem on fixed centers end to end.

    Vacuous profiles short-circuit to the nearest assignment (the LP optimum
    is integral and separable in that case, and this keeps tie-breaking
    aligned with the vanilla solver).
    """
    if problem.profile.is_vacuous:
        inst = problem.instance
        phi = nearest_assignment(inst, problem.opened)
        assignment = Assignment(inst, problem.opened, phi)
        obj = None
        if not math.isinf(problem.p):
            dsel = inst.dist_cf[np.arange(inst.n), phi]
            obj = float(np.sum(dsel**problem.p))
        return FairAssignmentResult(
            assignment=assignment, lambda_observed=0.0, rounding_iterations=0,
            initial_lp_objective=obj, lp2_objectives=(),
            state=_trivial_state(problem, phi),
        )
    if math.isinf(problem.p):
        return fair_assign_k_center(problem)
    sol = solve_lp(build_fair_lp(problem))
    if sol.status is LpStatus.INFEASIBLE:
        _raise_infeasible(problem.instance, problem.profile)
    if sol.status is not LpStatus.OPTIMAL:
        raise SolverError(f"fair LP ended {sol.status.value}")
    return iterative_round(problem, sol)


@dataclass(frozen=True)
class FairClusteringResult:
    vanilla: VanillaSolution
    solution: Assignment
    report: FairnessReport
    fair: FairAssignmentResult

    @property
    def lambda_observed(self) -> float:
        return self.fair.lambda_observed


def fair_clustering(instance: ClusteringInstance, profile: FairnessProfile,
                    solver_id: SolverId, seed: int = 0) -> FairClusteringResult:
    """Run the full pipeline: vanilla solve for S, fair assignment on S, report.

    The additive violation of the result is at most 4*Delta + 3, whatever the
    vanilla solver did.
    """
    t0 = time.perf_counter()
    vanilla = solve_vanilla(instance, solver_id, seed)
    t1 = time.perf_counter()
    problem = FairAssignmentProblem(instance, vanilla.opened, profile)
    result = fair_assignment(problem)
    t2 = time.perf_counter()
    report = build_report(
        instance, profile, result.assignment, vanilla.cost_p,
        timings_ms={
            "vanilla": (t1 - t0) * 1e3,
            "fair_assignment": (t2 - t1) * 1e3,
        },
    )
    return FairClusteringResult(vanilla=vanilla, solution=result.assignment,
                                report=report, fair=result)
