"""Independent reference implementations used as test oracles."""

import itertools
import math


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]


def tour_cost(d, order):
    path = (0,) + tuple(order) + (0,)
    return sum(d[a][b] for a, b in zip(path, path[1:]))


def brute_force_optimum(inst):
    """Minimum objective over all capacity-feasible partitions and visiting orders."""
    d = inst.dist.tolist()
    q = inst.demands.tolist()
    best_route = {}

    def route_cost(block):
        key = tuple(sorted(block))
        if key not in best_route:
            best_route[key] = min(tour_cost(d, p) for p in itertools.permutations(key))
        return best_route[key]

    best = math.inf
    for part in set_partitions(list(range(1, inst.n_customers + 1))):
        if len(part) > inst.fleet_size:
            continue
        if any(sum(q[c] for c in block) > inst.capacity for block in part):
            continue
        best = min(best, sum(route_cost(b) for b in part))
    return best


def savings_simulation(inst):
    """Step-by-step parallel savings with positive savings only, plain lists."""
    d = inst.dist.tolist()
    q = inst.demands.tolist()
    n = inst.n_customers
    savings = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            savings.append((d[0][i] + d[0][j] - d[i][j], i, j))
    savings.sort(key=lambda t: (-t[0], t[1], t[2]))
    routes = [[c] for c in range(1, n + 1)]
    for s, i, j in savings:
        if s <= 0:
            break
        ra = next(r for r in routes if i in r)
        rb = next(r for r in routes if j in r)
        if ra is rb or sum(q[c] for c in ra) + sum(q[c] for c in rb) > inst.capacity:
            continue
        if i not in (ra[0], ra[-1]) or j not in (rb[0], rb[-1]):
            continue
        left = ra if ra[-1] == i else ra[::-1]
        right = rb if rb[0] == j else rb[::-1]
        routes.remove(ra)
        routes.remove(rb)
        routes.append(left + right)
    return routes
