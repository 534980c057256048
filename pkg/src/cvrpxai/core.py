"""CVRP instances and solutions: types, file I/O and a synthetic generator.

Node index 0 is always the depot; customers are indexed 1..n.  Routes are
sequences of customer indices and implicitly start and end at the depot.
The original node labels of a parsed file are kept for writing it back.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SOURCES = ("optimal_proxy", "mnslite", "clarke_wright", "sweep")

GRID_SIZE = 1000
CAPACITY_HEADROOM = 1.2


class ParseError(ValueError):
    """Malformed instance or solution text."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class InvalidSolution(ValueError):
    pass


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    name: str
    coords: np.ndarray
    demands: np.ndarray
    capacity: int
    fleet_size: int
    rounded: bool = False
    labels: tuple[int, ...] = ()

    def __post_init__(self):
        coords = _frozen_array(self.coords, float)
        demands = _frozen_array(self.demands, np.int64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must have shape (n + 1, 2)")
        if demands.shape != (coords.shape[0],):
            raise ValueError("demands must have one entry per node")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "demands", demands)
        labels = tuple(int(v) for v in self.labels) or tuple(range(1, coords.shape[0] + 1))
        object.__setattr__(self, "labels", labels)
        self._validate()

    def _validate(self):
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if self.fleet_size <= 0:
            raise ValueError("fleet size must be positive")
        if len(self.labels) != len(self.coords):
            raise ValueError("one label per node required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("node labels must be unique")
        if self.demands[0] != 0:
            raise ValueError("depot demand must be 0")
        q = self.demands[1:]
        if np.any(q <= 0):
            raise ValueError("customer demands must be positive")
        if np.any(q > self.capacity):
            raise ValueError("demand exceeds capacity")
        if self.fleet_size * self.capacity < q.sum():
            raise ValueError("fleet too small for total demand")

    @property
    def n_customers(self) -> int:
        return len(self.coords) - 1

    @property
    def customers(self) -> range:
        return range(1, len(self.coords))

    @property
    def total_demand(self) -> int:
        return int(self.demands.sum())

    @cached_property
    def dist(self) -> np.ndarray:
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        d = np.sqrt((diff ** 2).sum(axis=-1))
        if self.rounded:
            d = np.floor(d + 0.5)
        d.setflags(write=False)
        return d

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.name == other.name
            and self.capacity == other.capacity
            and self.fleet_size == other.fleet_size
            and self.rounded == other.rounded
            and self.labels == other.labels
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.demands, other.demands)
        )

    def __hash__(self):
        return hash((self.name, self.capacity, self.fleet_size, self.labels))


def route_length(instance: Instance, route: Sequence[int]) -> float:
    if len(route) == 0:
        return 0.0
    d = instance.dist
    path = np.concatenate(([0], np.asarray(route, dtype=np.int64), [0]))
    return float(d[path[:-1], path[1:]].sum())


def objective(instance: Instance, routes: Iterable[Sequence[int]]) -> float:
    """Total travelled distance; every route starts and ends at the depot."""
    n = instance.n_customers
    total = 0.0
    for route in routes:
        for c in route:
            if not 1 <= int(c) <= n:
                raise InvalidSolution(f"unknown customer id {c}")
        total += route_length(instance, route)
    return total


@dataclass(frozen=True)
class Solution:
    instance_id: str
    routes: tuple[tuple[int, ...], ...]
    objective: float
    source: str
    gap_percent: float | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown solution source {self.source!r}")
        routes = tuple(tuple(int(c) for c in r) for r in self.routes)
        object.__setattr__(self, "routes", routes)

    @classmethod
    def build(cls, instance: Instance, routes, source: str, gap_percent=None) -> "Solution":
        routes = [r for r in routes if len(r) > 0]
        return cls(instance.name, routes, objective(instance, routes), source, gap_percent)

    def with_gap(self, gap_percent: float) -> "Solution":
        return Solution(self.instance_id, self.routes, self.objective, self.source, gap_percent)

    def with_source(self, source: str) -> "Solution":
        return Solution(self.instance_id, self.routes, self.objective, source, self.gap_percent)


def check_solution(instance: Instance, solution: Solution) -> None:
    """Raise InvalidSolution unless every Solution invariant holds."""
    if solution.instance_id != instance.name:
        raise InvalidSolution("solution belongs to another instance")
    seen = [c for r in solution.routes for c in r]
    if any(len(r) == 0 for r in solution.routes):
        raise InvalidSolution("empty route")
    if sorted(seen) != list(instance.customers):
        raise InvalidSolution("every customer must be visited exactly once")
    loads = [int(instance.demands[list(r)].sum()) for r in solution.routes]
    if max(loads, default=0) > instance.capacity:
        raise InvalidSolution("route over capacity")
    if len(solution.routes) > instance.fleet_size:
        raise InvalidSolution("more routes than vehicles")
    recomputed = objective(instance, solution.routes)
    if not math.isclose(recomputed, solution.objective, rel_tol=1e-9, abs_tol=1e-9):
        raise InvalidSolution(f"objective {solution.objective} != recomputed {recomputed}")


def is_feasible(instance: Instance, solution: Solution) -> bool:
    try:
        check_solution(instance, solution)
    except InvalidSolution:
        return False
    return True


# --- TSPLIB-style instance files -------------------------------------------

_SECTIONS = ("NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION")


def _num(token: str, lineno: int, fld: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"expected a number, got {token!r}", lineno, fld) from None


def _int(token: str, lineno: int, fld: str) -> int:
    value = _num(token, lineno, fld)
    if value != int(value):
        raise ParseError(f"expected an integer, got {token!r}", lineno, fld)
    return int(value)


def parse_instance(text: str, rounded: bool | None = None) -> Instance:
    """Parse a CVRP file in TSPLIB format.

    ``EDGE_WEIGHT_TYPE : EUC_2D`` selects rounded distances (the XML100
    convention) and ``EXACT_2D`` plain Euclidean; ``rounded`` overrides both.
    The fleet size comes from a ``VEHICLES`` entry or a "No of trucks"
    comment, else ceil(total demand / capacity).
    """
    header: dict[str, str] = {}
    coords: dict[int, tuple[float, float]] = {}
    demands: dict[int, int] = {}
    order: list[int] = []
    depots: list[int] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        key = line.split(":")[0].strip().upper()
        if key in _SECTIONS:
            section = key
            continue
        if key == "EOF":
            break
        if ":" in line and not line[0].isdigit() and not line.startswith("-"):
            k, v = line.split(":", 1)
            header[k.strip().upper()] = v.strip()
            section = None
            continue
        tokens = line.split()
        if section == "NODE_COORD_SECTION":
            if len(tokens) < 3:
                raise ParseError("malformed coordinate line", lineno, "NODE_COORD_SECTION")
            node = _int(tokens[0], lineno, "NODE_COORD_SECTION")
            if node in coords:
                raise ParseError(f"duplicate node id {node}", lineno, "NODE_COORD_SECTION")
            coords[node] = (_num(tokens[1], lineno, "NODE_COORD_SECTION"),
                            _num(tokens[2], lineno, "NODE_COORD_SECTION"))
            order.append(node)
        elif section == "DEMAND_SECTION":
            if len(tokens) < 2:
                raise ParseError("malformed demand line", lineno, "DEMAND_SECTION")
            node = _int(tokens[0], lineno, "DEMAND_SECTION")
            if node in demands:
                raise ParseError(f"duplicate node id {node}", lineno, "DEMAND_SECTION")
            demands[node] = _int(tokens[1], lineno, "DEMAND_SECTION")
        elif section == "DEPOT_SECTION":
            node = _int(tokens[0], lineno, "DEPOT_SECTION")
            if node == -1:
                section = None
            else:
                depots.append(node)
        else:
            raise ParseError(f"unexpected line {line!r}", lineno)

    if "CAPACITY" not in header:
        raise ParseError("missing CAPACITY", field="CAPACITY")
    capacity = _int(header["CAPACITY"], 0, "CAPACITY")
    if not depots:
        raise ParseError("missing depot", field="DEPOT_SECTION")
    if len(depots) > 1:
        raise ParseError("more than one depot", field="DEPOT_SECTION")
    depot = depots[0]
    if depot not in coords:
        raise ParseError(f"depot {depot} has no coordinates", field="DEPOT_SECTION")
    if "DIMENSION" in header and _int(header["DIMENSION"], 0, "DIMENSION") != len(coords):
        raise ParseError("DIMENSION does not match NODE_COORD_SECTION", field="DIMENSION")
    for node in order:
        if node not in demands:
            raise ParseError(f"node {node} has no demand", field="DEMAND_SECTION")
        if node != depot and demands[node] > capacity:
            raise ParseError(f"demand exceeds capacity for node {node}", field="DEMAND_SECTION")
        if node != depot and demands[node] <= 0:
            raise ParseError(f"non-positive demand for node {node}", field="DEMAND_SECTION")

    labels = [depot] + [v for v in order if v != depot]
    total = sum(demands[v] for v in labels[1:])
    fleet = _fleet_from_header(header)
    if fleet is None:
        fleet = max(1, math.ceil(total / capacity))
    if rounded is None:
        rounded = header.get("EDGE_WEIGHT_TYPE", "EUC_2D").upper() == "EUC_2D"
    q = [0] + [demands[v] for v in labels[1:]]
    try:
        return Instance(
            name=header.get("NAME", "unnamed"),
            coords=[coords[v] for v in labels],
            demands=q,
            capacity=capacity,
            fleet_size=fleet,
            rounded=rounded,
            labels=tuple(labels),
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _fleet_from_header(header: dict[str, str]) -> int | None:
    if "VEHICLES" in header:
        return int(header["VEHICLES"])
    m = re.search(r"No of trucks:\s*(\d+)", header.get("COMMENT", ""))
    return int(m.group(1)) if m else None


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def write_instance(instance: Instance) -> str:
    lines = [
        f"NAME : {instance.name}",
        "TYPE : CVRP",
        f"DIMENSION : {len(instance.coords)}",
        f"EDGE_WEIGHT_TYPE : {'EUC_2D' if instance.rounded else 'EXACT_2D'}",
        f"CAPACITY : {instance.capacity}",
        f"VEHICLES : {instance.fleet_size}",
        "NODE_COORD_SECTION",
    ]
    for label, (x, y) in zip(instance.labels, instance.coords):
        lines.append(f"{label} {_fmt(x)} {_fmt(y)}")
    lines.append("DEMAND_SECTION")
    for label, q in zip(instance.labels, instance.demands):
        lines.append(f"{label} {int(q)}")
    lines += ["DEPOT_SECTION", str(instance.labels[0]), "-1", "EOF", ""]
    return "\n".join(lines)


def read_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# --- CVRPLIB .sol files ----------------------------------------------------

def parse_solution(text: str, instance: Instance, source: str = "optimal_proxy") -> Solution:
    """Read "Route #k: ..." lines; customer numbers are node positions with the depot at 0."""
    routes = []
    cost = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.lower().startswith("route"):
            _, _, body = line.partition(":")
            try:
                routes.append([int(tok) for tok in body.split()])
            except ValueError:
                raise ParseError("malformed route", lineno, "Route") from None
        elif line.lower().startswith("cost"):
            cost = _num(line.split()[-1], lineno, "Cost")
        else:
            raise ParseError(f"unexpected line {line!r}", lineno)
    if cost is None:
        raise ParseError("missing Cost line", field="Cost")
    sol = Solution.build(instance, routes, source)
    check_solution(instance, sol)
    return sol


def write_solution(solution: Solution) -> str:
    lines = [f"Route #{k}: {' '.join(str(c) for c in r)}" for k, r in enumerate(solution.routes, start=1)]
    lines.append(f"Cost {_fmt(solution.objective)}")
    return "\n".join(lines) + "\n"


# --- synthetic generator ---------------------------------------------------

DEPOT_POSITIONS = ("central", "corner", "random")
LAYOUTS = ("uniform", "clustered", "mixed")
DEMAND_LAWS = ("unit", "uniform_small", "quadrant_skewed")


@dataclass(frozen=True)
class GeneratorConfig:
    n_customers: int
    depot_position: str = "central"
    customer_layout: str = "uniform"
    demand_law: str = "uniform_small"
    target_route_size: int = 5
    seed: int = 0
    rounded: bool = False
    capacity: int | None = None
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_customers < 1:
            raise ValueError("n_customers must be positive")
        if self.target_route_size < 1:
            raise ValueError("target_route_size must be positive")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("capacity must be positive")
        if self.depot_position not in DEPOT_POSITIONS:
            raise ValueError(f"depot_position must be one of {DEPOT_POSITIONS}")
        if self.customer_layout not in LAYOUTS:
            raise ValueError(f"customer_layout must be one of {LAYOUTS}")
        if self.demand_law not in DEMAND_LAWS:
            raise ValueError(f"demand_law must be one of {DEMAND_LAWS}")


def _clustered_points(rng: np.random.Generator, n: int) -> np.ndarray:
    n_seeds = int(rng.integers(3, 9))
    seeds = rng.integers(0, GRID_SIZE + 1, size=(n_seeds, 2))
    which = rng.integers(0, n_seeds, size=n)
    pts = seeds[which] + rng.normal(0.0, 0.04 * GRID_SIZE, size=(n, 2))
    return np.clip(np.rint(pts), 0, GRID_SIZE)


def _ffd_fits(demands: np.ndarray, capacity: int, bins: int) -> bool:
    loads = np.zeros(bins, dtype=np.int64)
    for q in sorted(demands.tolist(), reverse=True):
        free = np.flatnonzero(loads + q <= capacity)
        if free.size == 0:
            return False
        loads[free[0]] += q
    return True


def generate_instance(cfg: GeneratorConfig) -> Instance:
    """Random instance on a 1000x1000 integer grid.

    Unless given explicitly, capacity is ceil(1.2 * r * total demand / n):
    the XML100 sizing rule plus headroom so heuristics can stay within the
    fleet.  The fleet starts at ceil(n / r) and grows until the demands pack
    into it by first-fit decreasing, which implies K * Q >= total demand.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_customers

    if cfg.depot_position == "central":
        depot = np.array([GRID_SIZE / 2, GRID_SIZE / 2])
    elif cfg.depot_position == "corner":
        depot = np.array([0.0, 0.0])
    else:
        depot = rng.integers(0, GRID_SIZE + 1, size=2).astype(float)

    if cfg.customer_layout == "uniform":
        pts = rng.integers(0, GRID_SIZE + 1, size=(n, 2)).astype(float)
    elif cfg.customer_layout == "clustered":
        pts = _clustered_points(rng, n)
    else:
        n_clustered = n // 2
        pts = np.vstack([
            _clustered_points(rng, n_clustered),
            rng.integers(0, GRID_SIZE + 1, size=(n - n_clustered, 2)).astype(float),
        ])
        pts = pts[rng.permutation(n)]

    if cfg.demand_law == "unit":
        q = np.ones(n, dtype=np.int64)
    elif cfg.demand_law == "uniform_small":
        q = rng.integers(1, 11, size=n)
    else:
        odd = (pts[:, 0] < GRID_SIZE / 2) != (pts[:, 1] < GRID_SIZE / 2)
        q = np.where(odd, rng.integers(51, 101, size=n), rng.integers(1, 51, size=n))

    r = cfg.target_route_size
    if cfg.capacity is not None:
        capacity = cfg.capacity
    else:
        capacity = max(int(q.max()), math.ceil(CAPACITY_HEADROOM * r * q.sum() / n - 1e-9))
    fleet = math.ceil(n / r)
    while not _ffd_fits(q, capacity, fleet):
        fleet += 1

    name = cfg.name or (
        f"G-n{n}-{cfg.depot_position}-{cfg.customer_layout}-{cfg.demand_law}-r{r}-s{cfg.seed}"
    )
    return Instance(
        name=name,
        coords=np.vstack([depot, pts]),
        demands=np.concatenate(([0], q)),
        capacity=capacity,
        fleet_size=fleet,
        rounded=cfg.rounded,
    )
