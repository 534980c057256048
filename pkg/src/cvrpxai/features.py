"""The 31 structural features of an (instance, solution) pair.

Instance features I01-I09 describe the problem, solution features S01-S22
the route set.  SD always means the population standard deviation.  Angles
are in radians and measured about the depot.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .core import Instance, Solution

INSTANCE_KEYS = tuple(f"I{k:02d}" for k in range(1, 10))
SOLUTION_KEYS = tuple(f"S{k:02d}" for k in range(1, 23))
FEATURE_KEYS = INSTANCE_KEYS + SOLUTION_KEYS

FEATURE_NAMES = {
    "I01": "Number of customers",
    "I02": "Number of vehicles",
    "I03": "Degree of capacity utilization",
    "I04": "Mean customer-paired edge",
    "I05": "SD customer-paired edge",
    "I06": "Mean customer-depot edge",
    "I07": "SD customer-depot edge",
    "I08": "Mean angular deviation of customers",
    "I09": "SD angular deviation of customers",
    "S01": "Mean width of each route",
    "S02": "SD width of each route",
    "S03": "Mean span of each route",
    "S04": "SD span of each route",
    "S05": "Mean depth of each route",
    "S06": "SD depth of each route",
    "S07": "Route-edge ratio",
    "S08": "Mean max edge",
    "S09": "Longest-edge ratio (per route)",
    "S10": "Longest-edge ratio (global)",
    "S11": "Mean terminal edge",
    "S12": "Mean terminal demand customer",
    "S13": "Mean farthest customer's demand",
    "S14": "SD farthest customer's demand",
    "S15": "SD route length",
    "S16": "Mean route-centroid distance",
    "S17": "SD route-centroid distance",
    "S18": "Mean degree of neighborhood",
    "S19": "Mean route capacity utilization",
    "S20": "SD route capacity utilization",
    "S21": "Mean longest distance-relatedness",
    "S22": "SD longest distance-relatedness",
}

# features measured in distance units; they scale with the coordinates
DISTANCE_KEYS = ("I04", "I05", "I06", "I07", "S01", "S02", "S05", "S06",
                 "S08", "S11", "S15", "S16", "S17")


def _mean_sd(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0, 0.0
    if values.size == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std())


def _angles(instance: Instance, nodes) -> np.ndarray:
    rel = instance.coords[nodes] - instance.coords[0]
    ang = np.arctan2(rel[:, 1], rel[:, 0]) % (2 * math.pi)
    ang[np.all(rel == 0, axis=1)] = 0.0
    return ang


def extract_instance_features(instance: Instance) -> np.ndarray:
    n = instance.n_customers
    d = instance.dist
    cust = np.arange(1, n + 1)
    q = instance.demands[1:].astype(float)

    iu = np.triu_indices(n, k=1)
    pair = d[1:, 1:][iu]
    i04, i05 = _mean_sd(pair)
    i06, i07 = _mean_sd(d[0, 1:])

    theta = _angles(instance, cust)
    sx, sy = (q * np.cos(theta)).sum(), (q * np.sin(theta)).sum()
    # a vanishing resultant leaves the mean direction undefined; use 0
    mu = math.atan2(sy, sx) if math.hypot(sx, sy) > 1e-12 * q.sum() else 0.0
    dev = np.abs((theta - mu + math.pi) % (2 * math.pi) - math.pi)
    i08, i09 = _mean_sd(dev)

    i03 = instance.total_demand / (instance.fleet_size * instance.capacity)
    return np.array([n, instance.fleet_size, i03, i04, i05, i06, i07, i08, i09], dtype=float)


def _width(instance: Instance, route: np.ndarray) -> float:
    o = instance.coords[0]
    pts = instance.coords[route] - o
    g = pts.mean(axis=0)
    norm = math.hypot(g[0], g[1])
    normal = np.array([-g[1], g[0]]) / norm if norm > 0 else np.array([0.0, 1.0])
    proj = pts @ normal
    return float(proj.max() - proj.min())


def _span(instance: Instance, route: np.ndarray) -> float:
    if len(route) < 2:
        return 0.0
    ang = np.sort(_angles(instance, route))
    gaps = np.diff(np.concatenate((ang, [ang[0] + 2 * math.pi])))
    return float(2 * math.pi - gaps.max())


def _neighbour_rank(instance: Instance, a: int, b: int) -> int:
    d = instance.dist[a, 1:]
    others = np.delete(d, a - 1)
    return int(np.count_nonzero(others < d[b - 1])) + 1


def extract_solution_features(instance: Instance, solution: Solution) -> np.ndarray:
    if not solution.routes:
        raise ValueError("solution has no routes")
    d = instance.dist
    q = instance.demands
    o = instance.coords[0]
    n = instance.n_customers
    cust_d = d[1:, 1:]
    d_max = float(cust_d.max()) if n > 1 else 0.0

    widths, spans, depths, max_edges, edge_ratios = [], [], [], [], []
    terminal_edges, terminal_demands, far_demands = [], [], []
    lengths, centroid_d, utils, relatedness, all_edges, ranks = [], [], [], [], [], []
    for r in solution.routes:
        route = np.asarray(r, dtype=np.int64)
        path = np.concatenate(([0], route, [0]))
        edges = d[path[:-1], path[1:]]
        length = float(edges.sum())
        all_edges.append(edges)
        lengths.append(length)

        widths.append(_width(instance, route))
        spans.append(_span(instance, route))
        depth = d[0, route]
        depths.append(float(depth.max()))
        far = route[depth == depth.max()].min()
        far_demands.append(float(q[far]))
        max_edges.append(float(edges.max()))
        edge_ratios.append(float(edges.max()) / length if length > 0 else 0.0)
        terminal_edges += [float(edges[0]), float(edges[-1])]
        terminal_demands += [float(q[route[0]]), float(q[route[-1]])]
        g = instance.coords[route].mean(axis=0)
        centroid_d.append(float(math.hypot(*(g - o))))
        utils.append(float(q[route].sum()) / instance.capacity)

        if len(route) > 1:
            sub = d[np.ix_(route, route)]
            closest = sub[np.triu_indices(len(route), k=1)].min()
            relatedness.append(1.0 / (1.0 + closest / d_max) if d_max > 0 else 1.0)
        else:
            relatedness.append(0.0)
        for a, b in zip(route[:-1], route[1:]):
            ranks += [_neighbour_rank(instance, a, b), _neighbour_rank(instance, b, a)]

    edges = np.concatenate(all_edges)
    n_routes = len(solution.routes)
    s01, s02 = _mean_sd(widths)
    s03, s04 = _mean_sd(spans)
    s05, s06 = _mean_sd(depths)
    s07 = n_routes / edges.size
    s08 = float(np.mean(max_edges))
    s09 = float(np.mean(edge_ratios))
    s10 = float(edges.max() / edges.mean()) if edges.mean() > 0 else 0.0
    s11 = float(np.mean(terminal_edges))
    s12 = float(np.mean(terminal_demands))
    s13, s14 = _mean_sd(far_demands)
    s15 = _mean_sd(lengths)[1]
    s16, s17 = _mean_sd(centroid_d)
    s18 = float(np.mean(ranks)) if ranks else 0.0
    s19, s20 = _mean_sd(utils)
    s21, s22 = _mean_sd(relatedness)
    return np.array([s01, s02, s03, s04, s05, s06, s07, s08, s09, s10, s11, s12, s13, s14,
                     s15, s16, s17, s18, s19, s20, s21, s22], dtype=float)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    instance_id: str
    solution_source: str

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(FEATURE_KEYS),):
            raise ValueError(f"expected {len(FEATURE_KEYS)} features")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_KEYS, self.values.tolist()))

    def __getitem__(self, key: str) -> float:
        return float(self.values[FEATURE_KEYS.index(key)])


def extract(instance: Instance, solution: Solution) -> FeatureVector:
    values = np.concatenate((extract_instance_features(instance),
                             extract_solution_features(instance, solution)))
    return FeatureVector(values, instance.name, solution.source)


# --- feature matrix CSV ----------------------------------------------------

CSV_HEADER = ("instance_id", "source", "label") + FEATURE_KEYS


def write_feature_csv(rows, fh=None) -> str:
    """Write (FeatureVector, label) pairs sorted by (instance_id, source).

    Returns the CSV text; also writes it to ``fh`` when given.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for fv, label in sorted(rows, key=lambda r: (r[0].instance_id, r[0].solution_source)):
        writer.writerow([fv.instance_id, fv.solution_source, int(label)] + [repr(float(v)) for v in fv.values])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def read_feature_csv(text: str) -> list[tuple[FeatureVector, int]]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError("unexpected feature CSV header")
    rows = []
    for rec in reader:
        fv = FeatureVector([float(v) for v in rec[3:]], rec[0], rec[1])
        rows.append((fv, int(rec[2])))
    return rows
