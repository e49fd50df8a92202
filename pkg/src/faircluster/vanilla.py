"""Vanilla (k,p)-clustering solvers used as the black-box approximation step.

Three classics: Gonzalez farthest-point traversal for k-center, single-swap
local search (D-sampled starts, best of a few trials) for k-median, and
k-means++ with Lloyd iterations for k-means. All are deterministic given
(instance, k, seed): randomness flows from the single seed through
numpy SeedSequence spawn keys, so independent trials are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .instance import Assignment, ClusteringInstance, nearest_assignment


class SolverId(Enum):
    K_CENTER_GONZALEZ = "gonzalez"
    K_MEDIAN_LOCAL_SEARCH = "local_search"
    K_MEANS_LLOYD = "kmeans"


@dataclass(frozen=True)
class VanillaSolution:
    """Opened centers plus the nearest-facility assignment and solver metadata.

    ``lloyd_costs`` records the per-iteration SSE trace for the k-means
    solver (None for the others); useful for monotonicity checks.
    """

    assignment: Assignment
    solver_id: SolverId
    seed: int
    lloyd_costs: tuple[float, ...] | None = None

    @property
    def opened(self) -> tuple[int, ...]:
        return self.assignment.opened

    @property
    def phi(self) -> np.ndarray:
        return self.assignment.phi

    @property
    def cost_p(self) -> float:
        return self.assignment.cost_p


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _check_k(instance: ClusteringInstance, k: int) -> None:
    if not (1 <= k <= instance.m):
        raise ValueError(f"k={k} out of range [1, |F|={instance.m}]")


def _nearest_unchosen_facility(instance, client, chosen: set[int]) -> int:
    d = instance.dist_cf[client]
    order = np.argsort(d, kind="stable")
    for f in order:
        if int(f) not in chosen:
            return int(f)
    raise RuntimeError("no unchosen facility left")


def _gonzalez_from_start(instance: ClusteringInstance, k: int, start: int) -> list[int]:
    centers = [start]
    chosen = {start}
    mind = instance.dist_cf[:, start].copy()
    while len(centers) < k:
        far = int(np.argmax(mind))  # argmax ties -> lowest client index
        f = _nearest_unchosen_facility(instance, far, chosen)
        centers.append(f)
        chosen.add(f)
        np.minimum(mind, instance.dist_cf[:, f], out=mind)
    return centers


def gonzalez_k_center(instance: ClusteringInstance, k: int | None = None,
                      seed: int = 0) -> VanillaSolution:
    """Farthest-point traversal (2-approximation for the bottleneck objective).

    The first center is a seeded draw from F when F = C, else the
    lowest-index facility; each following center is the facility nearest to
    the client currently farthest from the chosen set.
    """
    k = instance.k if k is None else k
    _check_k(instance, k)
    if instance.facilities_are_clients:
        start = int(_rng(seed, 0).integers(instance.m))
    else:
        start = 0
    centers = _gonzalez_from_start(instance, k, start)
    phi = nearest_assignment(instance, centers)
    return VanillaSolution(
        assignment=Assignment(instance, tuple(centers), phi),
        solver_id=SolverId.K_CENTER_GONZALEZ, seed=seed,
    )


# -- k-median local search ---------------------------------------------------

def _d_sample_centers(instance: ClusteringInstance, k: int,
                      rng: np.random.Generator, power: float) -> list[int]:
    """Seed k centers by D-sampling: draw a client with probability
    proportional to d(client, chosen)^power, open its nearest unchosen facility."""
    n = instance.n
    first_client = int(rng.integers(n))
    chosen: set[int] = set()
    centers = [_nearest_unchosen_facility(instance, first_client, chosen)]
    chosen.add(centers[0])
    mind = instance.dist_cf[:, centers[0]].copy()
    while len(centers) < k:
        w = mind**power
        tot = w.sum()
        if tot > 0:
            v = int(rng.choice(n, p=w / tot))
        else:
            v = int(rng.integers(n))
        f = _nearest_unchosen_facility(instance, v, chosen)
        centers.append(f)
        chosen.add(f)
        np.minimum(mind, instance.dist_cf[:, f], out=mind)
    return centers


def _swap_pass(dist_cf: np.ndarray, centers: list[int], threshold: float):
    """Best single swap (f_out, f_in); returns (new_cost, f_out, f_in) or None.

    Uses the nearest/second-nearest decomposition so each candidate swap is
    evaluated in O(n) without re-scanning the whole center set.
    """
    n, m = dist_cf.shape
    sub = dist_cf[:, centers]                       # (n, k)
    order = np.argsort(sub, axis=1, kind="stable")
    min1_idx = order[:, 0]
    min1 = sub[np.arange(n), min1_idx]
    min2 = sub[np.arange(n), order[:, 1]] if len(centers) > 1 else np.full(n, np.inf)
    cost = min1.sum()

    in_set = np.zeros(m, dtype=bool)
    in_set[centers] = True
    candidates = np.flatnonzero(~in_set)
    if candidates.size == 0:
        return None

    best = None
    for pos, f_out in enumerate(centers):
        base = np.where(min1_idx == pos, min2, min1)  # serve cost without f_out
        new_costs = np.minimum(base[:, None], dist_cf[:, candidates]).sum(axis=0)
        j = int(np.argmin(new_costs))
        if best is None or new_costs[j] < best[0]:
            best = (float(new_costs[j]), f_out, int(candidates[j]))
    if best is not None and best[0] < threshold * cost:
        return best
    return None


def local_search_k_median(instance: ClusteringInstance, k: int | None = None,
                          seed: int = 0, trials: int = 5,
                          eps_ls: float = 1e-3) -> VanillaSolution:
    """Single-swap local search on the sum-of-distances objective.

    Each trial D-samples a start (power 1) and applies the best improving
    swap while it beats the (1 - eps_ls/k) improvement threshold; the best of
    ``trials`` independent runs is returned. Solution cost is reported in the
    instance norm, the search itself optimizes l_1.
    """
    k = instance.k if k is None else k
    _check_k(instance, k)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    threshold = 1.0 - eps_ls / k
    best_centers, best_cost = None, math.inf
    for t in range(trials):
        rng = _rng(seed, 1, t)
        centers = _d_sample_centers(instance, k, rng, power=1.0)
        if k < instance.m:
            while True:
                swap = _swap_pass(instance.dist_cf, centers, threshold)
                if swap is None:
                    break
                _, f_out, f_in = swap
                centers[centers.index(f_out)] = f_in
        cost = instance.dist_cf[:, centers].min(axis=1).sum()
        if cost < best_cost:
            best_cost, best_centers = cost, list(centers)
    phi = nearest_assignment(instance, best_centers)
    return VanillaSolution(
        assignment=Assignment(instance, tuple(best_centers), phi),
        solver_id=SolverId.K_MEDIAN_LOCAL_SEARCH, seed=seed,
    )


# -- k-means ------------------------------------------------------------------

def _dsq_to_centroids(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeanspp_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    idx = [int(rng.integers(n))]
    dsq = ((points - points[idx[0]]) ** 2).sum(axis=1)
    while len(idx) < k:
        tot = dsq.sum()
        if tot > 0:
            v = int(rng.choice(n, p=dsq / tot))
        else:
            v = int(rng.integers(n))
        idx.append(v)
        dsq = np.minimum(dsq, ((points - points[v]) ** 2).sum(axis=1))
    return points[idx].copy()


def kmeans(instance: ClusteringInstance, k: int | None = None, seed: int = 0,
           max_iters: int = 300, rel_tol: float = 1e-6) -> VanillaSolution:
    """k-means++ seeding plus Lloyd iterations, snapped back onto F.

    Lloyd runs in continuous centroid space until the relative SSE
    improvement drops below ``rel_tol`` (or ``max_iters``). Final centroids
    are snapped to their nearest facilities so the opened set lies in F;
    collapsed duplicates are refilled by farthest-point additions, then the
    nearest assignment is recomputed.
    """
    if not instance.is_euclidean:
        raise ValueError("k-means requires a coordinate (Euclidean) instance")
    k = instance.k if k is None else k
    _check_k(instance, k)
    pts = instance.points
    rng = _rng(seed, 2)
    centroids = _kmeanspp_seed(pts, k, rng)

    costs: list[float] = []
    prev = math.inf
    for _ in range(max_iters):
        dsq = _dsq_to_centroids(pts, centroids)
        labels = np.argmin(dsq, axis=1)
        sse = float(dsq[np.arange(len(pts)), labels].sum())
        costs.append(sse)
        if prev - sse <= rel_tol * max(prev, 1e-30) and len(costs) > 1:
            break
        prev = sse
        for j in range(k):
            mask = labels == j
            if mask.any():
                centroids[j] = pts[mask].mean(axis=0)
            else:
                # re-seed an empty centroid at the point farthest from its center
                far = int(np.argmax(dsq[np.arange(len(pts)), labels]))
                centroids[j] = pts[far]

    # snap centroids onto the facility set, dedupe, refill if collapsed
    fac = pts if instance.facility_points is None else instance.facility_points
    diff = centroids[:, None, :] - fac[None, :, :]
    snapped = np.argmin(np.einsum("kmd,kmd->km", diff, diff), axis=1)
    centers = list(dict.fromkeys(int(f) for f in snapped))
    if len(centers) < k:
        chosen = set(centers)
        mind = instance.dist_cf[:, centers].min(axis=1)
        while len(centers) < k:
            far = int(np.argmax(mind))
            f = _nearest_unchosen_facility(instance, far, chosen)
            centers.append(f)
            chosen.add(f)
            np.minimum(mind, instance.dist_cf[:, f], out=mind)
    phi = nearest_assignment(instance, centers)
    return VanillaSolution(
        assignment=Assignment(instance, tuple(centers), phi),
        solver_id=SolverId.K_MEANS_LLOYD, seed=seed,
        lloyd_costs=tuple(costs),
    )


def solve_vanilla(instance: ClusteringInstance, solver_id: SolverId,
                  seed: int = 0, k: int | None = None) -> VanillaSolution:
    if solver_id is SolverId.K_CENTER_GONZALEZ:
        return gonzalez_k_center(instance, k, seed)
    if solver_id is SolverId.K_MEDIAN_LOCAL_SEARCH:
        return local_search_k_median(instance, k, seed)
    if solver_id is SolverId.K_MEANS_LLOYD:
        return kmeans(instance, k, seed)
    raise ValueError(f"unknown solver {solver_id!r}")


def default_solver_for(p: float) -> SolverId:
    """Conventional pairing of norm and solver: 1 -> median, 2 -> means, inf -> center."""
    if math.isinf(p):
        return SolverId.K_CENTER_GONZALEZ
    if p == 1:
        return SolverId.K_MEDIAN_LOCAL_SEARCH
    return SolverId.K_MEANS_LLOYD
