"""Solution generators: optimal proxy and the three near-optimal families."""

from .construct import clarke_wright, enforce_fleet, polar_angles, savings_list, sweep, two_opt
from .exact import EXACT_LIMIT, exact_optimum, gap_to_optimal, optimal_proxy, proxy_regime
from .tabu import NEIGHBORHOODS, TabuConfig, mns_lite

__all__ = [
    "EXACT_LIMIT",
    "NEIGHBORHOODS",
    "TabuConfig",
    "clarke_wright",
    "enforce_fleet",
    "exact_optimum",
    "gap_to_optimal",
    "mns_lite",
    "optimal_proxy",
    "polar_angles",
    "proxy_regime",
    "savings_list",
    "sweep",
    "two_opt",
]
