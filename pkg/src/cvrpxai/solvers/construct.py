"""Constructive heuristics: Clarke-Wright savings and the sweep algorithm."""

from __future__ import annotations

import math

import numpy as np

from ..core import Instance, InvalidSolution, Solution


def savings_list(instance: Instance) -> list[tuple[float, int, int]]:
    """All pairs (s, i, j), i < j, sorted by descending saving then (i, j)."""
    d = instance.dist
    n = instance.n_customers
    i, j = np.triu_indices(n, k=1)
    i, j = i + 1, j + 1
    s = d[0, i] + d[0, j] - d[i, j]
    order = np.lexsort((j, i, -s))
    return [(float(s[k]), int(i[k]), int(j[k])) for k in order]


def clarke_wright(instance: Instance) -> Solution:
    """Parallel savings.

    Positive savings are merged first; non-positive ones are only used while
    the solution still has more routes than vehicles.
    """
    q = instance.demands
    route_of = {c: c for c in instance.customers}
    routes = {c: [c] for c in instance.customers}
    loads = {c: int(q[c]) for c in instance.customers}

    for s, i, j in savings_list(instance):
        if s <= 0 and len(routes) <= instance.fleet_size:
            break
        ri, rj = route_of[i], route_of[j]
        if ri == rj or loads[ri] + loads[rj] > instance.capacity:
            continue
        a, b = routes[ri], routes[rj]
        if i not in (a[0], a[-1]) or j not in (b[0], b[-1]):
            continue
        if a[-1] != i:
            a = a[::-1]
        if b[0] != j:
            b = b[::-1]
        routes[ri] = a + b
        loads[ri] += loads.pop(rj)
        del routes[rj]
        for c in b:
            route_of[c] = ri

    merged = [routes[k] for k in sorted(routes)]
    merged = enforce_fleet(instance, merged)
    return Solution.build(instance, merged, "clarke_wright")


def polar_angles(instance: Instance) -> np.ndarray:
    """Angle in [0, 2pi) of every customer about the depot (index 0 -> depot itself)."""
    rel = instance.coords - instance.coords[0]
    ang = np.arctan2(rel[:, 1], rel[:, 0]) % (2 * math.pi)
    ang[np.all(rel == 0, axis=1)] = 0.0
    return ang


def two_opt(instance: Instance, route: list[int]) -> list[int]:
    """Best-improvement 2-opt on one route until no improving move exists."""
    d = instance.dist
    route = list(route)
    if len(route) < 3:
        return route
    while True:
        path = [0] + route + [0]
        best, best_ij = 1e-10, None
        for i in range(1, len(path) - 2):
            a, b = path[i - 1], path[i]
            for j in range(i + 1, len(path) - 1):
                c, e = path[j], path[j + 1]
                gain = d[a, b] + d[c, e] - d[a, c] - d[b, e]
                if gain > best:
                    best, best_ij = gain, (i, j)
        if best_ij is None:
            return route
        i, j = best_ij
        route[i - 1:j] = route[i - 1:j][::-1]


def sweep(instance: Instance, start_angle: float = 0.0) -> Solution:
    """Sweep construction: angular order, greedy capacity packing, then 2-opt per route.

    Ties in angle are broken by distance to the depot, then customer index.
    ``start_angle`` rotates the ray the sweep starts from.
    """
    ang = (polar_angles(instance) - start_angle) % (2 * math.pi)
    radius = instance.dist[0]
    cust = np.arange(1, instance.n_customers + 1)
    order = cust[np.lexsort((cust, radius[cust], ang[cust]))]

    routes, current, load = [], [], 0
    for c in order:
        qc = int(instance.demands[c])
        if current and load + qc > instance.capacity:
            routes.append(current)
            current, load = [], 0
        current.append(int(c))
        load += qc
    if current:
        routes.append(current)

    routes = enforce_fleet(instance, routes)
    routes = [two_opt(instance, r) for r in routes]
    return Solution.build(instance, routes, "sweep")


def _cheapest_insertion(instance: Instance, route: list[int], c: int) -> tuple[float, int]:
    d = instance.dist
    path = [0] + route + [0]
    costs = [d[path[k], c] + d[c, path[k + 1]] - d[path[k], path[k + 1]] for k in range(len(path) - 1)]
    k = int(np.argmin(costs))
    return costs[k], k


def _dissolve(instance: Instance, routes: list[list[int]], victim: int) -> list[list[int]] | None:
    q = instance.demands
    rest = [list(r) for k, r in enumerate(routes) if k != victim]
    loads = [int(q[r].sum()) for r in rest]
    for c in sorted(routes[victim], key=lambda c: (-int(q[c]), c)):
        options = [
            (*_cheapest_insertion(instance, r, c), k)
            for k, r in enumerate(rest)
            if loads[k] + q[c] <= instance.capacity
        ]
        if not options:
            return None
        _, pos, k = min(options)
        rest[k].insert(pos, c)
        loads[k] += int(q[c])
    return rest


def enforce_fleet(instance: Instance, routes: list[list[int]]) -> list[list[int]]:
    """Dissolve light routes into the others until at most K remain.

    Customers of a dissolved route go, heaviest first, to their cheapest
    capacity-feasible insertion.  Routes are tried lightest first; if none
    can be dissolved the customers are re-packed first-fit decreasing.
    """
    routes = [list(r) for r in routes]
    q = instance.demands
    while len(routes) > instance.fleet_size:
        loads = [int(q[r].sum()) for r in routes]
        for victim in sorted(range(len(routes)), key=lambda k: (loads[k], len(routes[k]), k)):
            reduced = _dissolve(instance, routes, victim)
            if reduced is not None:
                routes = reduced
                break
        else:
            return _repack(instance)
    return routes


def _repack(instance: Instance) -> list[list[int]]:
    q = instance.demands
    ang = polar_angles(instance)
    bins = [[] for _ in range(instance.fleet_size)]
    loads = [0] * instance.fleet_size
    for c in sorted(instance.customers, key=lambda c: (-int(q[c]), c)):
        k = next((k for k in range(len(bins)) if loads[k] + q[c] <= instance.capacity), None)
        if k is None:
            raise InvalidSolution("demands do not fit into the available vehicles")
        bins[k].append(c)
        loads[k] += int(q[c])
    return [two_opt(instance, sorted(b, key=lambda c: ang[c])) for b in bins if b]
