"""Labelled scenario datasets: optimal solutions against a family of near-optimal ones."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import Instance, Solution
from .features import FeatureVector, extract, write_feature_csv


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    source: str | None = None
    gap_threshold: float | None = None

    def __post_init__(self):
        if (self.source is None) == (self.gap_threshold is None):
            raise ValueError("a scenario selects either a source or a gap threshold")

    def selects(self, solution: Solution) -> bool:
        gap = solution.gap_percent
        if gap is None or gap <= 0:
            return False
        if self.source is not None:
            return solution.source == self.source
        return gap > self.gap_threshold

    @property
    def description(self) -> str:
        if self.source is not None:
            return f"solutions solved by {self.source}"
        return f"all solutions with gap > {self.gap_threshold:g}%"


SCENARIOS = (
    ScenarioSpec("S1", source="mnslite"),
    ScenarioSpec("S2", source="clarke_wright"),
    ScenarioSpec("S3", source="sweep"),
    ScenarioSpec("S4", gap_threshold=2.0),
    ScenarioSpec("S5", gap_threshold=5.0),
    ScenarioSpec("S6", gap_threshold=7.0),
    ScenarioSpec("S7", gap_threshold=10.0),
    ScenarioSpec("S8", gap_threshold=15.0),
)
SCENARIO_IDS = tuple(s.id for s in SCENARIOS)


def scenario_by_id(sid: str) -> ScenarioSpec:
    for spec in SCENARIOS:
        if spec.id == sid:
            return spec
    raise KeyError(f"unknown scenario {sid!r}")


def make_scenarios(thresholds=(2.0, 5.0, 7.0, 10.0, 15.0)) -> tuple[ScenarioSpec, ...]:
    """S1-S3 by source plus S4.. for the given gap thresholds."""
    thresholds = [float(t) for t in thresholds]
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("gap thresholds must be strictly increasing")
    by_source = SCENARIOS[:3]
    return by_source + tuple(ScenarioSpec(f"S{k + 4}", gap_threshold=t) for k, t in enumerate(thresholds))


@dataclass(frozen=True, eq=False)
class CorpusEntry:
    """One instance with its optimal-class solution and near-optimal solutions.

    ``regime`` records how the optimal-class label was obtained: "exact",
    "restarts", "published" or "promoted" (a heuristic beat the restarts).
    """

    instance: Instance
    optimal: Solution
    near: tuple[Solution, ...]
    regime: str = "restarts"
    _features: dict = field(default_factory=dict, repr=False)

    @property
    def instance_id(self) -> str:
        return self.instance.name

    def features(self, solution: Solution) -> FeatureVector:
        key = (solution.source, solution.routes)
        if key not in self._features:
            self._features[key] = extract(self.instance, solution)
        return self._features[key]


@dataclass(frozen=True, eq=False)
class ScenarioDataset:
    scenario: ScenarioSpec
    rows: tuple[tuple[FeatureVector, int], ...]
    train: np.ndarray
    test: np.ndarray
    seed: int
    gaps: tuple[float, ...] = ()
    regimes: tuple[str, ...] = ()

    @cached_property
    def X(self) -> np.ndarray:
        return np.vstack([fv.values for fv, _ in self.rows])

    @cached_property
    def y(self) -> np.ndarray:
        return np.array([label for _, label in self.rows], dtype=np.int64)

    def to_csv(self) -> str:
        return write_feature_csv(self.rows)

    def split_sidecar(self) -> str:
        buf = io.StringIO()
        buf.write("test_row\n")
        for k in self.test:
            buf.write(f"{int(k)}\n")
        return buf.getvalue()


def stratified_split(y: np.ndarray, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    test = []
    for label in (0, 1):
        idx = np.flatnonzero(y == label)
        take = int(round(test_fraction * idx.size))
        test.append(rng.permutation(idx)[:take])
    test = np.sort(np.concatenate(test))
    train = np.setdiff1d(np.arange(len(y)), test)
    return train, test


def build_scenario(corpus, spec: ScenarioSpec, test_fraction: float = 0.25, seed: int = 0) -> ScenarioDataset:
    """Rows in (instance_id, source) order: one positive per instance plus selected negatives.

    Negatives are near-optimal solutions with a strictly positive gap that
    match the scenario's source filter or exceed its gap threshold.
    """
    rows, gaps, regimes = [], [], []
    for entry in sorted(corpus, key=lambda e: e.instance_id):
        members = [(entry.optimal, 1)] + [(s, 0) for s in entry.near if spec.selects(s)]
        for sol, label in sorted(members, key=lambda m: m[0].source):
            rows.append((entry.features(sol), label))
            gaps.append(0.0 if label else float(sol.gap_percent))
            regimes.append(entry.regime)
    y = np.array([label for _, label in rows], dtype=np.int64)
    if not np.any(y == 0):
        raise ValueError(f"empty negative class in scenario {spec.id}")
    train, test = stratified_split(y, test_fraction, seed)
    return ScenarioDataset(spec, tuple(rows), train, test, seed, tuple(gaps), tuple(regimes))


def class_balance(ds: ScenarioDataset) -> tuple[int, int, float]:
    """(positives, negatives, positive share)."""
    pos = int(np.sum(ds.y == 1))
    neg = int(np.sum(ds.y == 0))
    return pos, neg, pos / (pos + neg)
