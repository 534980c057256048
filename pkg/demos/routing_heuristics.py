"""
Building routes three ways and measuring how far each is from the best known
=============================================================================

A single generated instance, solved by the two constructive heuristics, by
tabu search started from the sweep routes, and by the restart proxy that
stands in for the optimum.  Run with ``python3 demos/routing_heuristics.py``.
"""

from cvrpxai.core import GeneratorConfig, generate_instance, write_solution
from cvrpxai.features import FEATURE_KEYS, extract
from cvrpxai.solvers import TabuConfig, clarke_wright, gap_to_optimal, mns_lite, optimal_proxy, sweep

# 30 customers in clusters around a central depot, routes of about 5 stops
inst = generate_instance(GeneratorConfig(n_customers=30, depot_position="central",
                                         customer_layout="clustered", target_route_size=5, seed=11))
print(inst.name, "customers:", inst.n_customers, "capacity:", inst.capacity, "vehicles:", inst.fleet_size)

cw = clarke_wright(inst)
sw = sweep(inst)
tabu = mns_lite(inst, sw, TabuConfig(max_iterations=100))
best = optimal_proxy(inst, TabuConfig(max_iterations=1000))  # best of 10 seeded tabu restarts

print()
print(f"{'source':<15}{'routes':>7}{'length':>10}{'gap %':>8}")
for sol in (best, tabu, cw, sw):
    print(f"{sol.source:<15}{len(sol.routes):>7}{sol.objective:>10.1f}{gap_to_optimal(sol, best):>8.2f}")

# the solution file format is the usual "Route #k: ..." listing
print()
print(write_solution(best))

# the 31 features of the sweep solution; distance-typed ones scale with the map
fv = extract(inst, sw)
for key in ("I04", "I06", "S05", "S18", "S19"):
    print(key, round(fv[key], 4))
print(len(FEATURE_KEYS), "features in all")
