"""Reference optima: exact search for tiny instances, restarts otherwise."""

from __future__ import annotations

import math

import numpy as np

from ..core import Instance, Solution
from .construct import clarke_wright, sweep
from .tabu import TabuConfig, mns_lite

EXACT_LIMIT = 9


def _held_karp(instance: Instance):
    """Shortest depot-rooted tour over every customer subset.

    Returns (cost, parent) where cost[mask] is the best closed tour through
    the customers in ``mask`` and parent allows the tour to be rebuilt.
    """
    n = instance.n_customers
    d = instance.dist
    full = 1 << n
    path = np.full((full, n), np.inf)
    parent = np.full((full, n), -1, dtype=np.int64)
    for c in range(n):
        path[1 << c, c] = d[0, c + 1]
    for mask in range(1, full):
        for last in range(n):
            if not mask >> last & 1 or not np.isfinite(path[mask, last]):
                continue
            base = path[mask, last]
            for nxt in range(n):
                if mask >> nxt & 1:
                    continue
                m2 = mask | (1 << nxt)
                cand = base + d[last + 1, nxt + 1]
                if cand < path[m2, nxt]:
                    path[m2, nxt] = cand
                    parent[m2, nxt] = last
    closing = path + d[1:n + 1, 0][None, :]
    return closing, parent


def _tour(closing, parent, mask) -> list[int]:
    last = int(np.argmin(closing[mask]))
    order = []
    while mask:
        order.append(last + 1)
        prev = parent[mask, last]
        mask ^= 1 << last
        last = prev
    return order[::-1]


def exact_optimum(instance: Instance) -> Solution:
    """Optimal solution by dynamic programming over customer subsets.

    Every capacity-feasible subset gets its exact TSP tour; the best
    partition into at most K such subsets is then found by enumerating the
    subsets that contain the lowest unrouted customer.
    """
    n = instance.n_customers
    if n > EXACT_LIMIT:
        raise ValueError(f"exact search limited to {EXACT_LIMIT} customers")
    if n == 0:
        return Solution.build(instance, [], "optimal_proxy")
    closing, parent = _held_karp(instance)
    q = instance.demands[1:]
    full = 1 << n
    tour_cost = np.full(full, np.inf)
    for mask in range(1, full):
        load = sum(int(q[c]) for c in range(n) if mask >> c & 1)
        if load <= instance.capacity:
            tour_cost[mask] = closing[mask].min()

    K = min(instance.fleet_size, n)
    # best[k][mask]: cheapest cover of mask with at most k routes
    best = np.full((K + 1, full), np.inf)
    choice = np.zeros((K + 1, full), dtype=np.int64)
    best[:, 0] = 0.0
    for k in range(1, K + 1):
        for mask in range(1, full):
            low = mask & -mask
            rest = mask ^ low
            sub = rest
            while True:
                block = sub | low
                cand = tour_cost[block] + best[k - 1, mask ^ block]
                if cand < best[k, mask]:
                    best[k, mask] = cand
                    choice[k, mask] = block
                if sub == 0:
                    break
                sub = (sub - 1) & rest
    if not np.isfinite(best[K, full - 1]):
        raise ValueError("instance has no feasible solution within the fleet size")

    routes, mask, k = [], full - 1, K
    while mask:
        block = int(choice[k, mask])
        routes.append(_tour(closing, parent, block))
        mask ^= block
        k -= 1
    return Solution.build(instance, routes, "optimal_proxy")


def restart_starts(instance: Instance, restarts: int, seed: int) -> list[Solution]:
    """Start solutions for the restarts: Clarke-Wright, then sweeps from seeded angles."""
    rng = np.random.default_rng(seed)
    starts = [clarke_wright(instance)]
    for _ in range(restarts - 1):
        starts.append(sweep(instance, start_angle=float(rng.uniform(0, 2 * math.pi))))
    return starts


def optimal_proxy(instance: Instance, cfg: TabuConfig | None = None, restarts: int = 10) -> Solution:
    """Exact optimum for at most nine customers, else the best of ``restarts`` mns_lite runs."""
    cfg = cfg or TabuConfig()
    if instance.n_customers <= EXACT_LIMIT:
        return exact_optimum(instance)
    if restarts < 10:
        raise ValueError("at least 10 restarts are required")
    best = None
    for r, start in enumerate(restart_starts(instance, restarts, cfg.seed)):
        cand = mns_lite(instance, start, cfg.replace(seed=cfg.seed + r))
        if best is None or cand.objective < best.objective - 1e-9:
            best = cand
    return best.with_source("optimal_proxy")


def proxy_regime(instance: Instance) -> str:
    return "exact" if instance.n_customers <= EXACT_LIMIT else "restarts"


def gap_to_optimal(near: Solution, opt: Solution) -> float:
    """Percentage excess of ``near`` over ``opt``."""
    if near.instance_id != opt.instance_id:
        raise ValueError("solutions belong to different instances")
    if opt.objective <= 0:
        raise ValueError("optimal objective must be positive")
    return (near.objective - opt.objective) / opt.objective * 100.0
