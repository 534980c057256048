"""End-to-end pipeline: corpus, features, scenarios, train, explain, unify, report.

Each stage reads what earlier stages persisted under the output directory,
so stages can be run one at a time or all together.  Layout::

    corpus/instances/<id>.vrp
    corpus/solutions/<id>.<source>.sol
    corpus/gaps.csv, corpus/solver_log.csv, corpus/config.json
    features/features.csv
    scenarios/<S>.csv, scenarios/<S>.split.csv, scenarios/class_balance.csv
    models/<S>/<kind>.json, classifiers.csv
    explanations/<S>.csv, importance.csv
    unified.csv
    reports/*.svg, manifest.json
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    DEMAND_LAWS,
    DEPOT_POSITIONS,
    LAYOUTS,
    GeneratorConfig,
    Instance,
    Solution,
    check_solution,
    generate_instance,
    parse_solution,
    read_instance,
    write_instance,
    write_solution,
)
from .explain import (
    explain_rows,
    importance_from_explanations,
    read_explanations_csv,
    read_importance_csv,
    unified_ranking,
    write_explanations_csv,
    write_importance_csv,
    write_unified_csv,
)
from .features import FEATURE_KEYS, read_feature_csv, write_feature_csv
from .learn import KINDS, TREE_KINDS, evaluate, fit, load_model, read_evaluation_csv, save_model, write_evaluation_csv
from .scenarios import CorpusEntry, build_scenario, class_balance, make_scenarios
from .solvers import NEIGHBORHOODS, TabuConfig, clarke_wright, gap_to_optimal, mns_lite, optimal_proxy, proxy_regime, sweep
from . import reports

STAGES = ("corpus", "features", "scenarios", "train", "explain", "unify", "report")
NEAR_SOURCES = ("mnslite", "clarke_wright", "sweep")
ESTIMATOR_NAMES = {"exact": "exact", "sample": "permutation_sampling", "tree": "tree_path"}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage


# --- configuration ---------------------------------------------------------

@dataclass
class CorpusSection:
    n_instances: int = 100
    n_min: int = 20
    n_max: int = 30
    depot_positions: tuple = DEPOT_POSITIONS
    layouts: tuple = LAYOUTS
    demand_laws: tuple = DEMAND_LAWS
    route_sizes: tuple = (3, 5, 8)
    rounded: bool = False
    seed: int = 0
    instance_dir: str | None = None

    def validate(self):
        if self.instance_dir is None:
            if self.n_instances < 1:
                raise ConfigError("corpus.n_instances must be positive")
            if not 1 <= self.n_min <= self.n_max:
                raise ConfigError("corpus needs 1 <= n_min <= n_max")
        for name, allowed in (("depot_positions", DEPOT_POSITIONS), ("layouts", LAYOUTS),
                              ("demand_laws", DEMAND_LAWS)):
            values = getattr(self, name)
            if not values or any(v not in allowed for v in values):
                raise ConfigError(f"corpus.{name} must be a non-empty subset of {allowed}")
        if not self.route_sizes or min(self.route_sizes) < 1:
            raise ConfigError("corpus.route_sizes must be positive")


@dataclass
class SolverSection:
    max_iterations: int = 1000
    tabu_tenure: int = 15
    neighborhoods: tuple = NEIGHBORHOODS
    time_budget_ms: int = 600_000
    restarts: int = 10
    near_iterations: int = 100
    seed: int = 0

    def tabu(self) -> TabuConfig:
        return TabuConfig(self.max_iterations, self.tabu_tenure, self.neighborhoods, self.seed, self.time_budget_ms)

    def validate(self):
        try:
            self.tabu()
            self.tabu().replace(max_iterations=self.near_iterations)
        except ValueError as exc:
            raise ConfigError(f"solver: {exc}") from None
        if self.restarts < 10:
            raise ConfigError("solver.restarts must be at least 10")


@dataclass
class ScenarioSection:
    test_fraction: float = 0.25
    thresholds: tuple = (2.0, 5.0, 7.0, 10.0, 15.0)
    ids: tuple | None = None
    seed: int = 0

    def specs(self):
        specs = make_scenarios(self.thresholds)
        if self.ids is None:
            return specs
        by_id = {s.id: s for s in specs}
        return tuple(by_id[i] for i in self.ids)

    def validate(self):
        if not 0 < self.test_fraction < 1:
            raise ConfigError("scenario.test_fraction must be in (0, 1)")
        try:
            specs = make_scenarios(self.thresholds)
        except ValueError as exc:
            raise ConfigError(f"scenario: {exc}") from None
        if self.ids is not None:
            known = {s.id for s in specs}
            bad = [i for i in self.ids if i not in known]
            if bad or not self.ids or len(set(self.ids)) != len(self.ids):
                raise ConfigError(f"scenario.ids must be distinct ids from {sorted(known)}")


@dataclass
class LearnSection:
    classifiers: dict = field(default_factory=lambda: {k: {} for k in KINDS})
    beta: float = 1.0
    seed: int = 0

    def validate(self):
        if not self.classifiers:
            raise ConfigError("learn.classifiers is empty")
        for kind in self.classifiers:
            if kind not in KINDS:
                raise ConfigError(f"unknown classifier kind {kind!r}")
        if self.beta <= 0:
            raise ConfigError("learn.beta must be positive")


@dataclass
class ExplainSection:
    estimator: str = "tree"
    n_permutations: int = 100
    background_size: int = 64
    max_rows: int = 200
    top_k: int = 10
    seed: int = 0

    def validate(self):
        if self.estimator not in ESTIMATOR_NAMES:
            raise ConfigError(f"explain.estimator must be one of {tuple(ESTIMATOR_NAMES)}")
        if min(self.n_permutations, self.background_size, self.max_rows, self.top_k) < 1:
            raise ConfigError("explain sizes must be positive")


_SECTIONS = {"corpus": CorpusSection, "solver": SolverSection, "scenario": ScenarioSection,
             "learn": LearnSection, "explain": ExplainSection}


@dataclass
class PipelineConfig:
    corpus: CorpusSection | None = field(default_factory=CorpusSection)
    solver: SolverSection = field(default_factory=SolverSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    learn: LearnSection = field(default_factory=LearnSection)
    explain: ExplainSection = field(default_factory=ExplainSection)
    out: str = "out"

    def validate(self) -> "PipelineConfig":
        for name in _SECTIONS:
            section = getattr(self, name)
            if section is not None:
                section.validate()
        return self

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - set(_SECTIONS) - {"out"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kw = {}
        for name, section_cls in _SECTIONS.items():
            if name not in d:
                continue
            raw = d[name]
            if raw is None:
                if name != "corpus":
                    raise ConfigError(f"section {name} cannot be null")
                kw[name] = None
                continue
            known = {f.name for f in dataclasses.fields(section_cls)}
            if not isinstance(raw, dict) or set(raw) - known:
                raise ConfigError(f"bad keys in section {name}: {sorted(set(raw) - known) if isinstance(raw, dict) else raw}")
            values = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
            try:
                kw[name] = section_cls(**values)
            except TypeError as exc:
                raise ConfigError(str(exc)) from None
        if "out" in d:
            kw["out"] = str(d["out"])
        return cls(**kw).validate()

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Copy with every section seed set to ``seed``."""
        d = self.to_dict()
        for name in _SECTIONS:
            if d.get(name) is not None:
                d[name]["seed"] = int(seed)
        return PipelineConfig.from_dict(d)


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return PipelineConfig.from_text(text)


# --- helpers --------------------------------------------------------------

def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_csv(path: Path) -> list[dict]:
    return list(csv.DictReader(io.StringIO(path.read_text())))


def _require(out: Path, rel: str, stage: str) -> Path:
    path = out / rel
    if not path.exists():
        raise StageError(stage, f"missing output of stage {_producer(rel)!r} ({rel})")
    return path


def _producer(rel: str) -> str:
    if rel.startswith("corpus"):
        return "corpus"
    if rel.startswith("features"):
        return "features"
    if rel.startswith("scenarios"):
        return "scenarios"
    if rel.startswith("classifiers") or rel.startswith("models"):
        return "train"
    if rel.startswith("importance") or rel.startswith("explanations"):
        return "explain"
    return "unify"


# --- corpus ------------------------------------------------------------------

def instance_configs(section: CorpusSection) -> list[GeneratorConfig]:
    """One generator config per instance, drawn from the configured axes."""
    cfgs = []
    for i in range(section.n_instances):
        rng = np.random.default_rng([section.seed, i])
        n = int(rng.integers(section.n_min, section.n_max + 1))
        cfgs.append(GeneratorConfig(
            n_customers=n,
            depot_position=section.depot_positions[int(rng.integers(len(section.depot_positions)))],
            customer_layout=section.layouts[int(rng.integers(len(section.layouts)))],
            demand_law=section.demand_laws[int(rng.integers(len(section.demand_laws)))],
            target_route_size=int(section.route_sizes[int(rng.integers(len(section.route_sizes)))]),
            seed=int(rng.integers(2 ** 31)),
            rounded=section.rounded,
            name=f"G{i:05d}-n{n}",
        ))
    return cfgs


def solve_instance(instance: Instance, solver: SolverSection, published: Solution | None = None):
    """Optimal-class solution plus the three near-optimal ones, with gaps.

    Returns (CorpusEntry, log rows).  If a heuristic beats the restart
    proxy, it becomes the optimal-class solution (regime "promoted").
    """
    tabu = solver.tabu()
    log = []

    def timed(source, fn):
        t0 = time.perf_counter()
        sol = fn()
        log.append([instance.name, source, sol, (time.perf_counter() - t0) * 1000.0])
        return sol

    if published is not None:
        opt, regime = published.with_source("optimal_proxy"), "published"
        log.append([instance.name, "optimal_proxy", opt, 0.0])
    else:
        opt = timed("optimal_proxy", lambda: optimal_proxy(instance, tabu, solver.restarts))
        regime = proxy_regime(instance)
    cw = timed("clarke_wright", lambda: clarke_wright(instance))
    sw = timed("sweep", lambda: sweep(instance))
    near_cfg = tabu.replace(max_iterations=solver.near_iterations)
    mn = timed("mnslite", lambda: mns_lite(instance, sw, near_cfg))
    near = [mn, cw, sw]
    best = min(near, key=lambda s: s.objective)
    if best.objective < opt.objective - 1e-9 and regime != "exact":
        opt, regime = best.with_source("optimal_proxy"), "promoted"
    opt = opt.with_gap(0.0)
    near = tuple(s.with_gap(gap_to_optimal(s, opt)) for s in near)
    for sol in (opt,) + near:
        check_solution(instance, sol)
    by_source = {s.source: s for s in (opt,) + near}
    rows = [[iid, src, repr(by_source[src].objective), repr(by_source[src].gap_percent), f"{ms:.3f}",
             solver.seed] for iid, src, _, ms in log]
    return CorpusEntry(instance, opt, near, regime), rows


def _corpus_stamp(cfg: PipelineConfig) -> str:
    return json.dumps({"corpus": cfg.to_dict()["corpus"], "solver": cfg.to_dict()["solver"]},
                      sort_keys=True, indent=2) + "\n"


def _entry_done(cdir: Path, name: str) -> bool:
    return (cdir / "instances" / f"{name}.vrp").exists() and all(
        (cdir / "solutions" / f"{name}.{src}.sol").exists() for src in ("optimal_proxy",) + NEAR_SOURCES)


def cmd_corpus(cfg: PipelineConfig, out: Path, resume: bool = False) -> list[CorpusEntry]:
    if cfg.corpus is None:
        raise StageError("corpus", "config has no corpus section")
    cdir = out / "corpus"
    stamp = _corpus_stamp(cfg)
    if (cdir / "gaps.csv").exists() and (cdir / "config.json").exists():
        if (cdir / "config.json").read_text() == stamp:
            return load_corpus(out)
        raise StageError("corpus", "existing corpus was built with a different config")
    if cdir.exists() and any(cdir.iterdir()) and not resume:
        raise StageError("corpus", "partial corpus found; rerun with --resume or remove it")
    if resume and (cdir / "config.json").exists() and (cdir / "config.json").read_text() != stamp:
        raise StageError("corpus", "partial corpus was started with a different config")
    _write(cdir / "config.json", stamp)

    jobs = []
    if cfg.corpus.instance_dir is not None:
        src = Path(cfg.corpus.instance_dir)
        paths = sorted(src.glob("*.vrp"))
        if not paths:
            raise StageError("corpus", f"no .vrp files in {src}")
        for p in paths:
            inst = read_instance(p)
            sol_path = p.with_suffix(".sol")
            published = parse_solution(sol_path.read_text(), inst) if sol_path.exists() else None
            jobs.append((inst, published))
    else:
        jobs = [(generate_instance(g), None) for g in instance_configs(cfg.corpus)]

    entries, log_rows = [], []
    for inst, published in jobs:
        if resume and _entry_done(cdir, inst.name):
            continue
        entry, rows = solve_instance(inst, cfg.solver, published)
        log_rows += rows
        _write(cdir / "instances" / f"{inst.name}.vrp", write_instance(inst))
        for sol in (entry.optimal,) + entry.near:
            _write(cdir / "solutions" / f"{inst.name}.{sol.source}.sol", write_solution(sol))
        _write(cdir / "regimes" / f"{inst.name}.txt", entry.regime + "\n")
        entries.append(entry)
    log_path = cdir / "solver_log.csv"
    if resume and log_path.exists():
        log_rows = [list(r.values()) for r in _read_csv(log_path)] + log_rows
    _write(log_path, _csv_text(("instance_id", "source", "objective", "gap", "wall_ms", "seed"), log_rows))
    entries = load_corpus(out, require_gaps=False)
    _write(cdir / "gaps.csv", gaps_csv(entries))
    return entries


def gaps_csv(entries) -> str:
    rows = []
    for e in sorted(entries, key=lambda e: e.instance_id):
        for s in sorted((e.optimal,) + e.near, key=lambda s: s.source):
            rows.append([e.instance_id, s.source, repr(s.objective), repr(s.gap_percent), e.regime])
    return _csv_text(("instance_id", "source", "objective", "gap_percent", "regime"), rows)


def load_corpus(out: Path, require_gaps: bool = True) -> list[CorpusEntry]:
    cdir = out / "corpus"
    if require_gaps:
        _require(out, "corpus/gaps.csv", "features")
    entries = []
    for p in sorted((cdir / "instances").glob("*.vrp")):
        inst = read_instance(p)
        sols = {}
        for src in ("optimal_proxy",) + NEAR_SOURCES:
            text = (cdir / "solutions" / f"{inst.name}.{src}.sol").read_text()
            sols[src] = parse_solution(text, inst, source=src)
        regime = (cdir / "regimes" / f"{inst.name}.txt").read_text().strip()
        opt = sols["optimal_proxy"].with_gap(0.0)
        near = tuple(sols[s].with_gap(gap_to_optimal(sols[s], opt)) for s in NEAR_SOURCES)
        entries.append(CorpusEntry(inst, opt, near, regime))
    if not entries:
        raise StageError("features", "corpus is empty; run stage 'corpus' first")
    return entries


# --- features and scenarios ---------------------------------------------------

def cmd_features(cfg: PipelineConfig, out: Path) -> str:
    entries = load_corpus(out)
    rows = []
    for e in entries:
        for sol in (e.optimal,) + e.near:
            rows.append((e.features(sol), 1 if sol.source == "optimal_proxy" else 0))
    text = write_feature_csv(rows)
    _write(out / "features" / "features.csv", text)
    return text


def cmd_scenarios(cfg: PipelineConfig, out: Path):
    entries = load_corpus(out)
    datasets = {}
    balance = []
    for spec in cfg.scenario.specs():
        try:
            ds = build_scenario(entries, spec, cfg.scenario.test_fraction, cfg.scenario.seed)
        except ValueError as exc:
            raise StageError("scenarios", str(exc)) from None
        _write(out / "scenarios" / f"{spec.id}.csv", ds.to_csv())
        _write(out / "scenarios" / f"{spec.id}.split.csv", ds.split_sidecar())
        pos, neg, share = class_balance(ds)
        balance.append([spec.id, spec.description, pos, neg, repr(share)])
        datasets[spec.id] = ds
    _write(out / "scenarios" / "class_balance.csv",
           _csv_text(("scenario", "description", "positives", "negatives", "positive_share"), balance))
    return datasets


@dataclass(frozen=True, eq=False)
class _Persisted:
    """A scenario dataset reloaded from its CSV and split sidecar."""
    sid: str
    X: np.ndarray
    y: np.ndarray
    train: np.ndarray
    test: np.ndarray


def load_scenario(out: Path, sid: str, stage: str) -> _Persisted:
    rows = read_feature_csv(_require(out, f"scenarios/{sid}.csv", stage).read_text())
    test = np.array([int(r["test_row"]) for r in _read_csv(_require(out, f"scenarios/{sid}.split.csv", stage))],
                    dtype=np.int64)
    X = np.vstack([fv.values for fv, _ in rows])
    y = np.array([label for _, label in rows], dtype=np.int64)
    train = np.setdiff1d(np.arange(len(y)), test)
    return _Persisted(sid, X, y, train, test)


# --- training ----------------------------------------------------------------

def cmd_train(cfg: PipelineConfig, out: Path) -> str:
    results = []
    for spec in cfg.scenario.specs():
        ds = load_scenario(out, spec.id, "train")
        for kind in KINDS:
            if kind not in cfg.learn.classifiers:
                continue
            params = dict(cfg.learn.classifiers[kind])
            if kind == "random_forest":
                params.setdefault("seed", cfg.learn.seed)
            try:
                model = fit(kind, params, ds.X[ds.train], ds.y[ds.train])
            except ValueError as exc:
                raise StageError("train", f"{spec.id}/{kind}: {exc}") from None
            save_model(model, _model_path(out, spec.id, kind))
            results.append((spec.id, kind, evaluate(model, ds.X[ds.test], ds.y[ds.test], cfg.learn.beta)))
    text = write_evaluation_csv(results)
    _write(out / "classifiers.csv", text)
    return text


def _model_path(out: Path, sid: str, kind: str) -> Path:
    path = out / "models" / sid / f"{kind}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def explained_classifier(scores: dict[str, float], estimator: str) -> str:
    """Best classifier by test F1; the tree estimator needs a tree kind.

    Ties go to the earlier kind in the canonical kind order.
    """
    kinds = [k for k in KINDS if k in scores and (estimator != "tree" or k in TREE_KINDS)]
    if not kinds:
        raise ValueError("no classifier suits the estimator")
    return max(kinds, key=lambda k: (scores[k], -KINDS.index(k)))


# --- explanation ---------------------------------------------------------------

def cmd_explain(cfg: PipelineConfig, out: Path):
    table = read_evaluation_csv(_require(out, "classifiers.csv", "explain").read_text())
    ex = cfg.explain
    imps = []
    for spec in cfg.scenario.specs():
        scores = {kind: f1 for sid, kind, _, _, f1 in table if sid == spec.id}
        if not scores:
            raise StageError("explain", f"no trained classifiers for {spec.id}")
        try:
            kind = explained_classifier(scores, ex.estimator)
        except ValueError as exc:
            raise StageError("explain", f"{spec.id}: {exc}") from None
        model = load_model(_require(out, f"models/{spec.id}/{kind}.json", "explain"))
        ds = load_scenario(out, spec.id, "explain")
        rng = np.random.default_rng([ex.seed, int(spec.id[1:])])
        bg_idx = np.sort(rng.choice(ds.train, size=min(ex.background_size, ds.train.size), replace=False))
        rows = np.sort(rng.permutation(ds.test)[:ex.max_rows])
        try:
            exps = explain_rows(model, ds.X[rows], ds.X[bg_idx], ex.estimator, ex.n_permutations, ex.seed,
                                row_ids=rows)
        except ValueError as exc:
            raise StageError("explain", f"{spec.id}: {exc}") from None
        _write(out / "explanations" / f"{spec.id}.csv", write_explanations_csv(exps))
        imps.append(importance_from_explanations(spec.id, exps, scores[kind]))
        _write(out / "explanations" / f"{spec.id}.meta.json", json.dumps({
            "scenario": spec.id, "classifier": kind, "f1": scores[kind], "estimator": ESTIMATOR_NAMES[ex.estimator],
            "rows": int(rows.size), "background": int(bg_idx.size), "n_permutations": ex.n_permutations,
            "seed": ex.seed}, sort_keys=True, indent=2) + "\n")
    _write(out / "importance.csv", write_importance_csv(imps))
    return imps


def cmd_unify(cfg: PipelineConfig, out: Path):
    imps = read_importance_csv(_require(out, "importance.csv", "unify").read_text())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        unified = unified_ranking(imps)
    for w in caught:
        warnings.warn(str(w.message), stacklevel=2)
    _write(out / "unified.csv", write_unified_csv(unified))
    return unified, [str(w.message) for w in caught]


# --- report ----------------------------------------------------------------------

_HASHED_DIRS = ("corpus/instances", "corpus/solutions", "features", "scenarios", "models", "explanations")
_HASHED_FILES = ("corpus/gaps.csv", "classifiers.csv", "importance.csv", "unified.csv")


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def build_manifest(cfg: PipelineConfig, out: Path) -> dict:
    """Summary recomputed from the persisted CSVs; wall-clock logs are left out."""
    balance = {r["scenario"]: {"positives": int(r["positives"]), "negatives": int(r["negatives"]),
                               "positive_share": float(r["positive_share"])}
               for r in _read_csv(_require(out, "scenarios/class_balance.csv", "report"))}
    table = {}
    for sid, kind, p, r, f1 in read_evaluation_csv(_require(out, "classifiers.csv", "report").read_text()):
        table.setdefault(sid, {})[kind] = {"precision": p, "recall": r, "f1": f1}
    explained = {}
    for sid in table:
        meta_path = out / "explanations" / f"{sid}.meta.json"
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            explained[sid] = {"classifier": meta["classifier"], "f1": meta["f1"], "rows": meta["rows"],
                              "estimator": meta["estimator"]}
    top = {}
    if (out / "importance.csv").exists():
        for imp in read_importance_csv((out / "importance.csv").read_text()):
            top[imp.scenario] = imp.top(cfg.explain.top_k)
    unified = [{"feature": r["feature"], "y": float(r["y"]), "rank": int(r["rank"])}
               for r in _read_csv(out / "unified.csv")] if (out / "unified.csv").exists() else []
    regimes = {}
    for r in _read_csv(_require(out, "corpus/gaps.csv", "report")):
        if r["source"] == "optimal_proxy":
            regimes[r["regime"]] = regimes.get(r["regime"], 0) + 1
    files = {}
    for rel in _HASHED_DIRS:
        for p in sorted((out / rel).rglob("*")):
            if p.is_file():
                files[p.relative_to(out).as_posix()] = _sha(p)
    for rel in _HASHED_FILES:
        if (out / rel).exists():
            files[rel] = _sha(out / rel)
    manifest = {
        "config": cfg.to_dict() | {"out": None},
        "regimes": regimes,
        "class_balance": balance,
        "classifiers": table,
        "explained": explained,
        "top_features": top,
        "unified": unified,
        "files": files,
    }
    manifest["manifest_hash"] = hashlib.sha256(json.dumps(manifest, sort_keys=True).encode()).hexdigest()
    return manifest


def cmd_report(cfg: PipelineConfig, out: Path) -> dict:
    rdir = out / "reports"
    gaps = _read_csv(_require(out, "corpus/gaps.csv", "report"))
    n_opt = sum(r["source"] == "optimal_proxy" for r in gaps)
    n_near = sum(r["source"] != "optimal_proxy" and float(r["gap_percent"]) > 0 for r in gaps)
    curves = {s: [float(r["gap_percent"]) for r in gaps if r["source"] == s and float(r["gap_percent"]) > 0]
              for s in NEAR_SOURCES}
    _write(rdir / "solution_distribution.svg", reports.pie_and_cumulative(
        [("optimal (y=1)", n_opt, str(n_opt)), ("near-optimal (y=0)", n_near, str(n_near))], curves,
        "Optimal vs near-optimal solutions and cumulative gap per source"))

    balance = _read_csv(_require(out, "scenarios/class_balance.csv", "report"))
    _write(rdir / "class_balance.svg", reports.grouped_bars(
        [r["scenario"] for r in balance], ["positive share"],
        [[float(r["positive_share"])] for r in balance], [[r["positive_share"]] for r in balance],
        "Positive-class share per scenario"))

    table = read_evaluation_csv(_require(out, "classifiers.csv", "report").read_text())
    sids = list(dict.fromkeys(r[0] for r in table))
    kinds = [k for k in KINDS if any(r[1] == k for r in table)]
    raw = {(r[0], r[1]): r[4] for r in table}
    text = {(r[0], r[1]): repr(r[4]) for r in table}
    _write(rdir / "classifiers.svg", reports.grouped_bars(
        sids, kinds, [[raw.get((s, k), 0.0) for k in kinds] for s in sids],
        [[text.get((s, k), "") for k in kinds] for s in sids], "Test F1 of every classifier per scenario"))

    if (out / "importance.csv").exists():
        imps = read_importance_csv((out / "importance.csv").read_text())
        panels = []
        for imp in imps:
            keys = imp.top(cfg.explain.top_k)
            bars = [(k, float(imp.s[FEATURE_KEYS.index(k)]), repr(float(imp.s[FEATURE_KEYS.index(k)]))) for k in keys]
            panels.append((f"{imp.scenario} (F1 {imp.f1:.3f})", bars))
        _write(rdir / "importance.svg", reports.hbar_panels(panels))
        for imp in imps:
            exps = read_explanations_csv(_require(out, f"explanations/{imp.scenario}.csv", "report").read_text())
            ds = load_scenario(out, imp.scenario, "report")
            keys = imp.top(cfg.explain.top_k)
            cols = [FEATURE_KEYS.index(k) for k in keys]
            phis = np.array([[e.phis[j] for j in cols] for e in exps])
            vals = ds.X[[e.row_id for e in exps]][:, cols]
            ranks = np.argsort(np.argsort(vals, axis=0, kind="stable"), axis=0, kind="stable")
            quant = ranks / max(1, len(exps) - 1)
            _write(rdir / f"strip_{imp.scenario}.svg",
                   reports.strip_plot(keys, phis, quant, f"{imp.scenario}: per-row attributions", seed=cfg.explain.seed))
    if (out / "unified.csv").exists():
        uni = _read_csv(out / "unified.csv")
        _write(rdir / "unified.svg", reports.hbar_panels(
            [("Unified importance (F1-weighted mean |attribution|)",
              [(r["feature"], float(r["y"]), r["y"]) for r in uni])]))

    manifest = build_manifest(cfg, out)
    _write(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def cmd_run_all(cfg: PipelineConfig, out: Path, resume: bool = False) -> dict:
    out = Path(out)
    if cfg.corpus is not None:
        run_stage("corpus", cfg, out, resume=resume)
    for stage in STAGES[1:]:
        run_stage(stage, cfg, out)
    return json.loads((out / "manifest.json").read_text())


def run_stage(stage: str, cfg: PipelineConfig, out: Path, resume: bool = False):
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StageError(stage, f"cannot create output directory: {exc}") from None
    if stage == "corpus":
        return cmd_corpus(cfg, out, resume)
    fn = {"features": cmd_features, "scenarios": cmd_scenarios, "train": cmd_train,
          "explain": cmd_explain, "unify": cmd_unify, "report": cmd_report}[stage]
    if stage == "features" and not (out / "corpus" / "gaps.csv").exists():
        if cfg.corpus is None:
            raise StageError("features", "missing stage 'corpus': no corpus in the output directory "
                                         "and no corpus section in the config")
    try:
        return fn(cfg, out)
    except StageError:
        raise
    except (ValueError, OSError, KeyError) as exc:
        raise StageError(stage, str(exc)) from exc
