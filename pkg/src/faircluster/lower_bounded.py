"""Lower-bounded clustering: every opened facility must serve at least L clients.

The FPT route: run any vanilla solver to fix candidate centers S, then for
every nonempty subset T of S solve a min-cost b-matching in which each client
is matched once and each facility of T receives at least L clients. Facility
lower bounds are removed by the standard excess/deficit transformation and
the resulting problem is solved by successive shortest paths with potentials.
For the bottleneck norm the matching objective is meaningless, so the best
radius is binary-searched with 0/1 feasibility matchings instead.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Assignment, ClusteringInstance
from .vanilla import SolverId, VanillaSolution, solve_vanilla

SUBSET_ENUMERATION_CAP = 20


class LbInfeasibleError(ValueError):
    """No subset of centers can serve every facility with at least L clients."""


@dataclass(frozen=True)
class LbProblem:
    """Lower-bounded clustering instance: every opened center serves >= L clients."""

    instance: ClusteringInstance
    L: int
    k: int | None = None

    def __post_init__(self):
        if not (1 <= self.L <= self.instance.n):
            raise LbInfeasibleError(f"L={self.L} must lie in [1, n={self.instance.n}]")
        if self.k is None:
            object.__setattr__(self, "k", self.instance.k)

    def solve(self, solver_id: "SolverId | None" = None, seed: int = 0,
              subset_cap: int = SUBSET_ENUMERATION_CAP) -> "LbClusteringResult":
        return lb_clustering(self.instance, self.L, self.k, solver_id, seed, subset_cap)


@dataclass
class FlowNetwork:
    """Arc-list flow network with per-arc lower bounds.

    ``min_cost_flow`` routes the given node balances (positive = supply) at
    minimum cost, honoring lower bounds via the excess/deficit reduction.
    """

    num_nodes: int
    arcs: list[tuple[int, int, int, int, float]] = field(default_factory=list)
    # (tail, head, lower, capacity, cost)

    def add_arc(self, tail: int, head: int, lower: int, capacity: int, cost: float) -> int:
        if not (0 <= tail < self.num_nodes and 0 <= head < self.num_nodes):
            raise ValueError("arc endpoint out of range")
        if not (0 <= lower <= capacity):
            raise ValueError(f"need 0 <= lower ({lower}) <= capacity ({capacity})")
        if cost < 0 or not math.isfinite(cost):
            raise ValueError("arc costs must be finite and nonnegative")
        self.arcs.append((tail, head, lower, capacity, cost))
        return len(self.arcs) - 1

    def min_cost_flow(self, balances) -> tuple[np.ndarray, float] | None:
        """Returns (flow per arc, total cost), or None when infeasible.

        ``balances[v]`` is the required net outflow of node v; they must sum
        to zero. Successive shortest paths with Dijkstra + potentials; arc
        costs are nonnegative so the initial potentials are zero.
        """
        bal = [float(b) for b in balances]
        if len(bal) != self.num_nodes:
            raise ValueError("one balance per node required")
        if abs(sum(bal)) > 1e-9:
            raise ValueError("balances must sum to zero")

        # lower-bound reduction: force l units through each arc up front
        base_flow = np.zeros(len(self.arcs), dtype=np.int64)
        base_cost = 0.0
        for a, (u, w, lower, cap, cost) in enumerate(self.arcs):
            if lower:
                base_flow[a] = lower
                base_cost += lower * cost
                bal[u] -= lower
                bal[w] += lower

        # residual graph with super source/sink absorbing the balances
        nn = self.num_nodes + 2
        src, snk = self.num_nodes, self.num_nodes + 1
        head: list[int] = []
        cap_res: list[int] = []
        cost_res: list[float] = []
        adj: list[list[int]] = [[] for _ in range(nn)]
        arc_pos: list[int] = []

        def push_edge(u, w, c, cost):
            adj[u].append(len(head))
            head.append(w)
            cap_res.append(c)
            cost_res.append(cost)
            adj[w].append(len(head))
            head.append(u)
            cap_res.append(0)
            cost_res.append(-cost)

        for a, (u, w, lower, cap, cost) in enumerate(self.arcs):
            arc_pos.append(len(head))
            push_edge(u, w, cap - lower, cost)
        total = 0
        for v, b in enumerate(bal):
            if b > 1e-9:
                push_edge(src, v, int(round(b)), 0.0)
                total += int(round(b))
            elif b < -1e-9:
                push_edge(v, snk, int(round(-b)), 0.0)

        potential = [0.0] * nn
        INF = math.inf
        sent = 0
        while sent < total:
            dist = [INF] * nn
            parent_edge = [-1] * nn
            dist[src] = 0.0
            pq = [(0.0, src)]
            while pq:
                d, u = heapq.heappop(pq)
                if d > dist[u] + 1e-12:
                    continue
                for e in adj[u]:
                    if cap_res[e] <= 0:
                        continue
                    w = head[e]
                    rc = cost_res[e] + potential[u] - potential[w]
                    if rc < 0.0:
                        rc = 0.0  # float noise; exact SSP keeps reduced costs >= 0
                    nd = d + rc
                    if nd < dist[w] - 1e-12:
                        dist[w] = nd
                        parent_edge[w] = e
                        heapq.heappush(pq, (nd, w))
            if parent_edge[snk] < 0:
                return None
            for v in range(nn):
                if dist[v] < INF:
                    potential[v] += dist[v]
            # bottleneck along the path
            push = total - sent
            v = snk
            while v != src:
                e = parent_edge[v]
                push = min(push, cap_res[e])
                v = head[e ^ 1]
            v = snk
            while v != src:
                e = parent_edge[v]
                cap_res[e] -= push
                cap_res[e ^ 1] += push
                v = head[e ^ 1]
            sent += push

        flow = base_flow.copy()
        cost_total = base_cost
        for a, (u, w, lower, cap, cost) in enumerate(self.arcs):
            routed = (cap - lower) - cap_res[arc_pos[a]]
            flow[a] += routed
            cost_total += routed * cost
        return flow, cost_total


def _matching_network(n: int, t: int, lower: int, costs: np.ndarray):
    """Clients 0..n-1, facilities n..n+t-1, sink n+t; client arcs cap 1."""
    net = FlowNetwork(num_nodes=n + t + 1)
    sink = n + t
    arc_of: dict[tuple[int, int], int] = {}
    for v in range(n):
        for j in range(t):
            arc_of[(v, j)] = net.add_arc(v, n + j, 0, 1, float(costs[v, j]))
    for j in range(t):
        net.add_arc(n + j, sink, lower, n, 0.0)
    balances = [1.0] * n + [0.0] * t + [-float(n)]
    return net, arc_of, balances, sink


def min_cost_lb_matching(instance: ClusteringInstance, facilities, L: int,
                         p: float | None = None) -> tuple[np.ndarray, float] | None:
    """Minimum-cost assignment of all clients to ``facilities`` where every
    facility receives at least L clients; edge costs are d(v,f)^p.

    Returns (phi over all clients, total cost^p), or None when infeasible
    (exactly when L * |facilities| > n). Finite p only; the bottleneck case
    goes through lb_clustering's radius search.
    """
    if p is None:
        p = instance.p
    if math.isinf(p):
        raise ValueError("min_cost_lb_matching needs finite p")
    fac = sorted(dict.fromkeys(int(f) for f in facilities))
    if not fac:
        raise ValueError("facility subset must be nonempty")
    n, t = instance.n, len(fac)
    if L * t > n:
        return None
    costs = instance.dist_cf[:, fac] ** p
    net, arc_of, balances, _ = _matching_network(n, t, L, costs)
    res = net.min_cost_flow(balances)
    if res is None:
        return None
    flow, total = res
    phi = np.full(n, -1, dtype=int)
    for (v, j), a in arc_of.items():
        if flow[a] == 1:
            phi[v] = fac[j]
    if (phi < 0).any():
        raise RuntimeError("flow left a client unmatched despite feasibility")
    return phi, float(total)


def _bottleneck_lb_matching(instance: ClusteringInstance, fac: list[int],
                            L: int) -> tuple[np.ndarray, float] | None:
    """Smallest radius G such that a matching with all arcs d <= G exists;
    returns (phi, G) or None when L * |fac| > n."""
    n, t = instance.n, len(fac)
    if L * t > n:
        return None
    d = instance.dist_cf[:, fac]
    values = np.unique(d)

    def attempt(radius: float):
        net = FlowNetwork(num_nodes=n + t + 1)
        sink = n + t
        arc_of = {}
        for v in range(n):
            for j in range(t):
                if d[v, j] <= radius:
                    arc_of[(v, j)] = net.add_arc(v, n + j, 0, 1, 0.0)
        for j in range(t):
            net.add_arc(n + j, sink, L, n, 0.0)
        res = net.min_cost_flow([1.0] * n + [0.0] * t + [-float(n)])
        if res is None:
            return None
        phi = np.full(n, -1, dtype=int)
        for (v, j), a in arc_of.items():
            if res[0][a] == 1:
                phi[v] = fac[j]
        if (phi < 0).any():
            return None
        return phi

    lo = int(np.searchsorted(values, d.min(axis=1).max()))
    hi = len(values) - 1
    best = attempt(float(values[hi]))
    if best is None:
        return None
    best_idx = hi
    while lo < best_idx:
        mid = (lo + best_idx) // 2
        phi = attempt(float(values[mid]))
        if phi is not None:
            best, best_idx = phi, mid
        else:
            lo = mid + 1
    return best, float(values[best_idx])


@dataclass(frozen=True)
class LbClusteringResult:
    vanilla: VanillaSolution
    solution: Assignment
    subsets_evaluated: int

    @property
    def cost_p(self) -> float:
        return self.solution.cost_p


def lb_clustering(instance: ClusteringInstance, L: int, k: int | None = None,
                  solver_id: SolverId | None = None, seed: int = 0,
                  subset_cap: int = SUBSET_ENUMERATION_CAP) -> LbClusteringResult:
    """Lower-bounded (k,p)-clustering by subset enumeration over vanilla centers.

    Evaluates all 2^|S| - 1 nonempty subsets of the vanilla solution's
    centers; infeasible subsets (L * |T| > n) are skipped. Ties on cost break
    to the lexicographically smallest subset, so the result is independent of
    enumeration order. Every cluster of the result has size >= L.
    """
    k = instance.k if k is None else k
    if k > subset_cap:
        raise ValueError(f"k={k} exceeds the subset enumeration cap {subset_cap}")
    if not (1 <= L <= instance.n):
        raise LbInfeasibleError(f"L={L} must lie in [1, n={instance.n}]")
    if solver_id is None:
        solver_id = SolverId.K_CENTER_GONZALEZ if math.isinf(instance.p) else \
            SolverId.K_MEDIAN_LOCAL_SEARCH if instance.p == 1 else SolverId.K_MEANS_LLOYD
    vanilla = solve_vanilla(instance, solver_id, seed, k)
    S = sorted(vanilla.opened)

    best: tuple[float, tuple[int, ...], np.ndarray] | None = None
    evaluated = 0
    for size in range(1, len(S) + 1):
        for T in itertools.combinations(S, size):
            evaluated += 1
            if math.isinf(instance.p):
                res = _bottleneck_lb_matching(instance, list(T), L)
                if res is None:
                    continue
                phi, cost = res
            else:
                res = min_cost_lb_matching(instance, T, L)
                if res is None:
                    continue
                phi, cost = res
            key = (cost, T)
            if best is None or key < (best[0], best[1]):
                best = (cost, T, phi)
    if best is None:
        raise LbInfeasibleError(
            f"no feasible subset: L={L} cannot be met by any T of the {len(S)} centers"
        )
    cost, T, phi = best
    assignment = Assignment(instance, T, phi)
    sizes = assignment.cluster_sizes()
    short = {f: s for f, s in sizes.items() if s < L}
    if short:
        raise RuntimeError(f"matching postcondition broken: clusters below L: {short}")
    return LbClusteringResult(vanilla=vanilla, solution=assignment,
                              subsets_evaluated=evaluated)
