import numpy as np
import pytest

from cvrpxai.core import GeneratorConfig, Instance, generate_instance


def make_instance(coords, demands, capacity, fleet=None, name="t", rounded=False):
    """Depot first in ``coords``; ``demands`` lists the customers only."""
    q = [0] + list(demands)
    if fleet is None:
        fleet = max(1, -(-sum(demands) // capacity))
    return Instance(name, np.asarray(coords, dtype=float), q, capacity, fleet, rounded)


def random_instance(n, seed, **kw):
    rng = np.random.default_rng(seed)
    cfg = GeneratorConfig(
        n_customers=n,
        depot_position=kw.pop("depot_position", ("central", "corner", "random")[int(rng.integers(3))]),
        customer_layout=kw.pop("customer_layout", ("uniform", "clustered", "mixed")[int(rng.integers(3))]),
        demand_law=kw.pop("demand_law", ("unit", "uniform_small", "quadrant_skewed")[int(rng.integers(3))]),
        target_route_size=kw.pop("target_route_size", int(rng.integers(2, 7))),
        seed=seed,
        **kw,
    )
    return generate_instance(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance summary ----------------------------------------------------------
# Tests named test_criterion_<k> print one PASS/FAIL line each at the end of the run.

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    name = item.name
    if not name.startswith("test_criterion_"):
        return
    key = int(name.split("_")[2])
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = dict(item.user_properties).get("detail", "")
        status = "PASS" if report.passed else "FAIL"
        doc = (item.function.__doc__ or "").strip().splitlines()[0]
        _CRITERIA[key] = f"criterion {key}: {status}  {doc}" + (f"  [{detail}]" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[key])
