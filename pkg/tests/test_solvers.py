import math

import numpy as np
import pytest

from cvrpxai.core import Solution, check_solution, objective
from cvrpxai.solvers import (
    TabuConfig,
    clarke_wright,
    exact_optimum,
    gap_to_optimal,
    mns_lite,
    optimal_proxy,
    savings_list,
    sweep,
)

from conftest import make_instance, random_instance
from oracles import brute_force_optimum, savings_simulation


def _route_set(routes):
    return {min(tuple(r), tuple(r[::-1])) for r in routes}


# --- Clarke-Wright ---------------------------------------------------------

def test_cw_merges_two_close_customers():
    x = math.sqrt(24.0)
    inst = make_instance([(0, 0), (x, 1), (x, -1)], [1, 1], 2)
    sol = clarke_wright(inst)
    assert sol.routes == ((1, 2),)
    assert math.isclose(sol.objective, 12.0, rel_tol=1e-12)


def test_cw_capacity_blocks_merge():
    x = math.sqrt(24.0)
    inst = make_instance([(0, 0), (x, 1), (x, -1)], [2, 2], 3, fleet=2)
    assert _route_set(clarke_wright(inst).routes) == {(1,), (2,)}


def test_savings_order_is_lexicographic_on_ties():
    # four customers on a square around the depot: many equal savings
    inst = make_instance([(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)], [1] * 4, 4)
    sv = savings_list(inst)
    keys = [(-s, i, j) for s, i, j in sv]
    assert keys == sorted(keys)


@pytest.mark.parametrize("seed", range(10))
def test_cw_matches_step_by_step_simulation(seed):
    inst = random_instance(8, seed, target_route_size=3)
    # a fleet of n vehicles keeps the fleet repair out of the comparison
    inst = make_instance(inst.coords, inst.demands[1:], inst.capacity, fleet=8)
    expected = savings_simulation(inst)
    sol = clarke_wright(inst)
    assert _route_set(sol.routes) == _route_set(expected)
    assert math.isclose(sol.objective, objective(inst, expected), rel_tol=1e-12)
    assert inst.n_customers - len(sol.routes) <= inst.n_customers - 1


# --- sweep -------------------------------------------------------------------

def test_sweep_packs_pairs_in_angular_order():
    ang = np.radians([10, 20, 200, 210])
    coords = [(0, 0)] + [(10 * math.cos(a), 10 * math.sin(a)) for a in ang]
    inst = make_instance(coords, [5, 5, 5, 5], 10, fleet=2)
    assert _route_set(sweep(inst).routes) == {(1, 2), (3, 4)}


def test_sweep_single_customer():
    inst = make_instance([(0, 0), (3, 4)], [1], 5)
    sol = sweep(inst)
    assert sol.routes == ((1,),)
    assert sol.objective == 10.0


def test_sweep_customer_on_depot_gets_angle_zero():
    inst = make_instance([(0, 0), (0, 0), (0, 5), (-5, 0)], [1, 1, 1], 1, fleet=3)
    sol = sweep(inst)
    check_solution(inst, sol)
    assert sol.routes[0] == (1,)


def test_sweep_usually_no_better_than_cw():
    worse = 0
    for seed in range(100):
        inst = random_instance(7, 1000 + seed)
        worse += sweep(inst).objective >= clarke_wright(inst).objective - 1e-9
    assert worse >= 60


# --- exact search and the proxy -------------------------------------------------

def test_proxy_single_customer():
    inst = make_instance([(0, 0), (3, 4)], [1], 5)
    sol = optimal_proxy(inst)
    assert sol.routes == ((1,),)
    assert sol.objective == 10.0
    assert sol.source == "optimal_proxy"


@pytest.mark.parametrize("seed", range(8))
def test_exact_matches_brute_force(seed):
    n = 4 + seed % 4
    inst = random_instance(n, 500 + seed)
    opt = exact_optimum(inst)
    check_solution(inst, opt)
    assert math.isclose(opt.objective, brute_force_optimum(inst), rel_tol=1e-9)


def test_exact_seven_customers_two_orders():
    inst = random_instance(7, 77, target_route_size=3)
    ref = brute_force_optimum(inst)
    # relabel customers in reverse; the optimum value must not move
    perm = [0] + list(range(7, 0, -1))
    flipped = make_instance(inst.coords[perm], inst.demands[perm][1:], inst.capacity, inst.fleet_size)
    assert math.isclose(exact_optimum(inst).objective, ref, rel_tol=1e-9)
    assert math.isclose(exact_optimum(flipped).objective, ref, rel_tol=1e-9)


def test_proxy_needs_ten_restarts():
    inst = random_instance(12, 3)
    with pytest.raises(ValueError):
        optimal_proxy(inst, TabuConfig(max_iterations=50), restarts=5)


def test_proxy_beats_or_ties_heuristics():
    inst = random_instance(25, 4)
    opt = optimal_proxy(inst, TabuConfig(max_iterations=300))
    check_solution(inst, opt)
    for near in (clarke_wright(inst), sweep(inst)):
        assert gap_to_optimal(near, opt) >= -1e-9


# --- mns_lite ----------------------------------------------------------------

def test_mns_lite_reaches_optimum_on_six_customers():
    hits = 0
    for seed in range(50):
        inst = random_instance(6, 2000 + seed)
        sol = mns_lite(inst, sweep(inst), TabuConfig(seed=seed))
        check_solution(inst, sol)
        hits += math.isclose(sol.objective, brute_force_optimum(inst), rel_tol=1e-9)
    assert hits >= 45


def test_mns_lite_keeps_an_optimal_start():
    inst = random_instance(8, 9)
    opt = exact_optimum(inst)
    sol = mns_lite(inst, opt, TabuConfig(max_iterations=200))
    assert sol.routes == opt.routes
    assert sol.objective == opt.objective
    assert sol.source == "mnslite"


def test_mns_lite_is_deterministic_and_monotone():
    inst = random_instance(30, 10)
    start = clarke_wright(inst)
    cfg = TabuConfig(max_iterations=400, seed=3)
    a, b = mns_lite(inst, start, cfg), mns_lite(inst, start, cfg)
    assert a == b
    assert a.objective <= start.objective + 1e-9
    check_solution(inst, a)


@pytest.mark.parametrize("hood", ["relocate", "swap", "two_opt", "or_opt"])
def test_each_neighbourhood_alone_is_sound(hood):
    inst = random_instance(20, 21)
    start = sweep(inst)
    sol = mns_lite(inst, start, TabuConfig(max_iterations=200, neighborhoods=(hood,)))
    check_solution(inst, sol)
    assert sol.objective <= start.objective + 1e-9


def test_mns_lite_rejects_infeasible_start():
    inst = random_instance(6, 1)
    bad = Solution(inst.name, ((1, 2),), 1.0, "sweep")
    with pytest.raises(ValueError, match="infeasible"):
        mns_lite(inst, bad)


@pytest.mark.parametrize("kw", [dict(max_iterations=10, tabu_tenure=10), dict(neighborhoods=()),
                                dict(neighborhoods=("three_opt",)), dict(time_budget_ms=0)])
def test_tabu_config_invariants(kw):
    with pytest.raises(ValueError):
        TabuConfig(**kw)


# --- gap --------------------------------------------------------------------------

@pytest.mark.parametrize("near, opt, gap", [(110.0, 100.0, 10.0), (100.0, 100.0, 0.0), (103.5, 100.0, 3.5)])
def test_gap_examples(near, opt, gap):
    a = Solution("x", ((1,),), near, "sweep")
    b = Solution("x", ((1,),), opt, "optimal_proxy")
    assert math.isclose(gap_to_optimal(a, b), gap, abs_tol=1e-12)


def test_gap_errors():
    a = Solution("x", ((1,),), 1.0, "sweep")
    with pytest.raises(ValueError):
        gap_to_optimal(a, Solution("y", ((1,),), 1.0, "optimal_proxy"))
    with pytest.raises(ValueError):
        gap_to_optimal(a, Solution("x", ((1,),), 0.0, "optimal_proxy"))
