import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import fcluster, linkage

from cvrpxai.core import (
    GeneratorConfig,
    InvalidSolution,
    ParseError,
    Solution,
    check_solution,
    generate_instance,
    objective,
    parse_instance,
    parse_solution,
    write_instance,
    write_solution,
)

from conftest import make_instance, random_instance

THREE = """NAME : three
TYPE : CVRP
DIMENSION : 4
EDGE_WEIGHT_TYPE : EXACT_2D
CAPACITY : 10
NODE_COORD_SECTION
1 0 0
2 3 4
3 6 8
4 0 5
DEMAND_SECTION
1 0
2 2
3 3
4 4
DEPOT_SECTION
1
-1
EOF
"""


def test_parse_three_customers():
    inst = parse_instance(THREE)
    assert inst.n_customers == 3
    assert inst.dist[0, 1] == 5.0
    assert inst.capacity == 10
    assert inst.fleet_size == 1  # ceil(9 / 10)
    assert not inst.rounded


def test_demand_over_capacity_is_rejected():
    bad = THREE.replace("3 3\n", "3 15\n")
    with pytest.raises(ParseError, match="demand exceeds capacity") as info:
        parse_instance(bad)
    assert info.value.field == "DEMAND_SECTION"


@pytest.mark.parametrize("mutate, fld", [
    (lambda t: t.replace("3 6 8\n", "3 6 8\n3 1 1\n"), "NODE_COORD_SECTION"),
    (lambda t: t.replace("DEPOT_SECTION\n1\n", "DEPOT_SECTION\n"), "DEPOT_SECTION"),
    (lambda t: t.replace("2 3 4\n", "2 3 x\n"), "NODE_COORD_SECTION"),
    (lambda t: t.replace("CAPACITY : 10\n", ""), "CAPACITY"),
])
def test_parse_errors_name_the_field(mutate, fld):
    with pytest.raises(ParseError) as info:
        parse_instance(mutate(THREE))
    assert info.value.field == fld


def test_parse_error_reports_line():
    with pytest.raises(ParseError) as info:
        parse_instance(THREE.replace("2 3 4\n", "2 3 x\n"))
    assert info.value.line == 8


def test_euc_2d_rounds_distances():
    text = THREE.replace("EXACT_2D", "EUC_2D").replace("4 0 5", "4 1 1")
    inst = parse_instance(text)
    assert inst.rounded
    assert inst.dist[0, 3] == 1.0  # sqrt(2) -> 1


def test_vehicles_from_comment():
    text = THREE.replace("TYPE : CVRP", "COMMENT : (Augerat, No of trucks: 3, Optimal value: 1)\nTYPE : CVRP")
    assert parse_instance(text).fleet_size == 3


def test_round_trip_50_generated_instances():
    for seed in range(50):
        inst = random_instance(int(5 + seed % 40), seed, rounded=bool(seed % 2))
        text = write_instance(inst)
        again = parse_instance(text)
        assert again == inst
        assert write_instance(again) == text


def test_round_trip_keeps_fractional_coordinates():
    inst = make_instance([(0.5, 0.25), (1 / 3, 2.0), (7.125, -1.0)], [1, 1], 5)
    assert parse_instance(write_instance(inst)) == inst


def test_generator_is_deterministic():
    cfg = GeneratorConfig(5, "central", "uniform", "unit", seed=7)
    assert write_instance(generate_instance(cfg)) == write_instance(generate_instance(cfg))


def test_generator_fleet_for_unit_demands():
    inst = generate_instance(GeneratorConfig(20, demand_law="unit", target_route_size=5, capacity=5, seed=3))
    assert inst.fleet_size == 4
    assert inst.capacity == 5


def test_distinct_seeds_give_distinct_instances():
    texts = {write_instance(generate_instance(GeneratorConfig(10, seed=s))) for s in range(100)}
    assert len(texts) >= 99


def test_clustered_layout_forms_clusters():
    inst = generate_instance(GeneratorConfig(100, customer_layout="clustered", seed=11))
    pts = inst.coords[1:]
    span = pts.max(axis=0) - pts.min(axis=0)
    threshold = 0.1 * math.hypot(*span)
    labels = fcluster(linkage(pts, method="single"), t=threshold, criterion="distance")
    assert len(set(labels)) >= 2


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 2 ** 32 - 1),
       depot=st.sampled_from(["central", "corner", "random"]),
       layout=st.sampled_from(["uniform", "clustered", "mixed"]),
       law=st.sampled_from(["unit", "uniform_small", "quadrant_skewed"]),
       r=st.integers(1, 12))
def test_generated_instances_satisfy_invariants(n, seed, depot, layout, law, r):
    inst = generate_instance(GeneratorConfig(n, depot, layout, law, r, seed))
    q = inst.demands[1:]
    assert inst.n_customers == n
    assert np.all((q > 0) & (q <= inst.capacity))
    assert inst.fleet_size >= math.ceil(q.sum() / inst.capacity)
    assert inst.fleet_size >= math.ceil(n / r)
    d = inst.dist
    assert np.array_equal(d, d.T)
    # triangle inequality of the unrounded metric
    assert np.all(d[:, :, None] <= d[:, None, :] + d.T[None, :, :] + 1e-9)


def test_objective_examples():
    inst = parse_instance(THREE)
    assert objective(inst, [[1]]) == 10.0
    empty = make_instance([(0, 0), (1, 0)], [1], 1)
    assert objective(empty, []) == 0.0
    with pytest.raises(InvalidSolution):
        objective(inst, [[4]])


def test_route_reversal_keeps_objective(rng):
    inst = random_instance(12, 5)
    route = list(rng.permutation(np.arange(1, 13)))
    assert math.isclose(objective(inst, [route]), objective(inst, [route[::-1]]), rel_tol=1e-12)


def test_solution_invariants():
    inst = parse_instance(THREE)
    good = Solution.build(inst, [[1, 2, 3]], "sweep")
    check_solution(inst, good)
    with pytest.raises(InvalidSolution):
        check_solution(inst, Solution.build(inst, [[1, 2]], "sweep"))
    with pytest.raises(InvalidSolution):
        check_solution(inst, Solution.build(inst, [[1, 2, 3, 3]], "sweep"))
    with pytest.raises(InvalidSolution):
        check_solution(inst, Solution(inst.name, ((1, 2, 3),), good.objective + 1, "sweep"))
    tight = make_instance([(0, 0), (1, 0), (2, 0)], [3, 3], 4, fleet=2)
    with pytest.raises(InvalidSolution, match="capacity"):
        check_solution(tight, Solution.build(tight, [[1, 2]], "sweep"))
    with pytest.raises(ValueError):
        Solution(inst.name, ((1, 2, 3),), 1.0, "genetic")


def test_solution_file_round_trip():
    inst = random_instance(15, 2)
    from cvrpxai.solvers import clarke_wright

    sol = clarke_wright(inst)
    again = parse_solution(write_solution(sol), inst, source="clarke_wright")
    assert again.routes == sol.routes
    assert again.objective == sol.objective
