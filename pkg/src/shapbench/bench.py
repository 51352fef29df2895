"""End-to-end benchmark runs, ground truth, timing sweeps and the results table.

A run directory holds::

    config.json      the resolved BenchmarkConfig
    report.json      every deterministic result (byte-identical for equal config + seed)
    report.sha256    hash of report.json
    timing.json      wall-clock measurements, kept out of the hashed report
    attributions_<dataset>.csv, models/<dataset>.json, plots/
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from shapbench import __version__, kernels
from shapbench import estimators as est
from shapbench import evaluation as ev
from shapbench.blackbox import Model, TrainConfig, load_model, save_model, train_default_mlp
from shapbench.data import (
    Dataset,
    SyntheticSpec,
    load_csv,
    load_monks,
    load_wbc,
    make_synthetic,
    split,
)
from shapbench.game import MAX_ENUMERATION_FEATURES, CoalitionGame
from shapbench.rng import make_rng
from shapbench.serialize import dumps, read_json, write_json

EXPLAINERS = ("exact", "kernelshap", "unbiased-ks", "monte-carlo", "fastshap", "expected-grad")
DEFAULT_BUDGETS = {"kernelshap": 512, "unbiased-ks": 512, "monte-carlo": 64, "expected-grad": 1000}
AUTO_EXACT_MAX_FEATURES = 14
AUTO_UNBIASED_SAMPLES = 1 << 17
SWEEP_EXACT_MAX_FEATURES = 20
REPORT_SCHEMA = 1


class ConfigError(ValueError):
    pass


class GroundTruthError(ConfigError):
    pass


@dataclass
class SamplesSweep:
    max: int = 500
    interval: int = 100
    method: str = "random"
    dataset: str | None = None


@dataclass
class FeaturesSweep:
    m_list: list[int] = field(default_factory=lambda: [4, 6, 8, 10])
    n_instances: int = 5
    n_synthetic: int = 500


@dataclass
class BenchmarkConfig:
    explainers: list[str] = field(default_factory=lambda: list(EXPLAINERS))
    ground_truth: str = "auto"
    datasets: list = field(default_factory=lambda: ["monks"])
    metrics: list[str] = field(default_factory=lambda: ["l1", "l2", "kendall"])
    num_samples: int = 100
    seed: int = 7
    background_size: int = 100
    primary_metric: str = "l2"
    auc: bool = True
    blackbox: dict = field(default_factory=dict)
    fastshap: dict = field(default_factory=dict)
    samples_sweep: SamplesSweep | None = field(default_factory=SamplesSweep)
    features_sweep: FeaturesSweep | None = field(default_factory=FeaturesSweep)

    def validate(self) -> None:
        if not self.explainers:
            raise ConfigError("at least one explainer is required")
        names = [ExplainerSpec.parse(text).name for text in self.explainers]
        if len(set(names)) != len(names):
            raise ConfigError(f"each explainer may appear once, got {self.explainers}")
        for metric in self.metrics:
            if metric not in ev.METRICS:
                raise ConfigError(f"unknown metric {metric!r}; choose from {sorted(ev.METRICS)}")
        if self.num_samples < 1:
            raise ConfigError("num_samples must be positive")
        if self.background_size < 1:
            raise ConfigError("background_size must be positive")
        parse_ground_truth(self.ground_truth)
        for name in self.datasets:
            resolve_dataset_name(name)
        if self.samples_sweep is not None:
            s = self.samples_sweep
            if not s.max >= s.interval >= 1:
                raise ConfigError("samples sweep needs max >= interval >= 1")
            if s.method not in ("random", "first-k"):
                raise ConfigError("samples sweep method must be 'random' or 'first-k'")
        if self.features_sweep is not None and any(m < 2 for m in self.features_sweep.m_list):
            raise ConfigError("features sweep needs every M >= 2")
        try:
            TrainConfig(**self.blackbox)
            est.FastShapConfig(**self.fastshap)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = asdict(self)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchmarkConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        doc = dict(doc)
        if doc.get("samples_sweep") is not None:
            doc["samples_sweep"] = SamplesSweep(**doc["samples_sweep"])
        if doc.get("features_sweep") is not None:
            doc["features_sweep"] = FeaturesSweep(**doc["features_sweep"])
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def config_hash(self) -> str:
        return hashlib.sha256(dumps(self.to_dict(), indent=None).encode()).hexdigest()[:16]


@dataclass
class ExplainerSpec:
    name: str
    budget: int | None = None
    full: bool = False

    @classmethod
    def parse(cls, text: str) -> "ExplainerSpec":
        name, _, arg = text.partition(":")
        if name not in EXPLAINERS:
            raise ConfigError(f"unknown explainer {name!r}; choose from {', '.join(EXPLAINERS)}")
        if not arg:
            return cls(name, DEFAULT_BUDGETS.get(name))
        if arg == "full":
            if name != "kernelshap":
                raise ConfigError("only kernelshap supports ':full'")
            return cls(name, None, True)
        try:
            budget = int(arg)
        except ValueError:
            raise ConfigError(f"bad budget {arg!r} for {name}") from None
        if budget < 1:
            raise ConfigError(f"budget for {name} must be positive")
        return cls(name, budget)


def parse_ground_truth(policy: str) -> tuple[str, int | None]:
    name, _, arg = policy.partition(":")
    if name in ("auto", "exact"):
        return name, None
    if name == "unbiased-ks":
        return name, int(arg) if arg else AUTO_UNBIASED_SAMPLES
    raise ConfigError(f"unknown ground-truth policy {policy!r}; use auto, exact or unbiased-ks[:n]")


def resolve_policy(policy: str, n_features: int) -> tuple[str, int | None]:
    name, n = parse_ground_truth(policy)
    if name == "auto":
        if n_features <= AUTO_EXACT_MAX_FEATURES:
            return "exact", None
        return "unbiased-ks", AUTO_UNBIASED_SAMPLES
    if name == "exact" and n_features > MAX_ENUMERATION_FEATURES:
        raise GroundTruthError(
            f"exact ground truth is intractable for {n_features} features "
            f"(limit {MAX_ENUMERATION_FEATURES}); use --ground-truth unbiased-ks:<n>"
        )
    return name, n


# -- datasets -----------------------------------------------------------------

VAL_FRACTIONS = {"monks": 0.3, "wbc": 0.2}


def resolve_dataset_name(entry) -> str:
    if isinstance(entry, dict):
        if "path" not in entry:
            raise ConfigError("dataset entries given as objects need a 'path'")
        return entry.get("name") or Path(entry["path"]).stem
    if entry in ("monks", "wbc") or str(entry).startswith("synthetic-linear-"):
        if str(entry).startswith("synthetic-linear-"):
            try:
                int(str(entry).rsplit("-", 1)[1])
            except ValueError:
                raise ConfigError(f"bad synthetic dataset name {entry!r}") from None
        return str(entry)
    raise ConfigError(f"unknown dataset {entry!r}; use monks, wbc, synthetic-linear-<M> or a CSV object")


def load_named_dataset(entry, seed: int) -> tuple[Dataset, float]:
    if isinstance(entry, dict):
        ds = load_csv(
            entry["path"],
            entry.get("label_column", -1),
            entry.get("delimiter", ","),
            name=resolve_dataset_name(entry),
            ordinal_columns=entry.get("ordinal_columns"),
        )
        return ds, float(entry.get("val_fraction", 0.2))
    if entry == "monks":
        return load_monks(), VAL_FRACTIONS["monks"]
    if entry == "wbc":
        return load_wbc(), VAL_FRACTIONS["wbc"]
    m = int(str(entry).rsplit("-", 1)[1])
    ds, _ = make_synthetic(SyntheticSpec(m, 1000, "linear", seed, with_oracle=m <= 25))
    return ds, 0.2


def choose_background(train_X: np.ndarray, size: int, seed: int, label: str) -> np.ndarray:
    rng = make_rng(seed, "background", label)
    n = train_X.shape[0]
    rows = np.sort(rng.choice(n, size=min(size, n), replace=False))
    return train_X[rows]


def get_model(split_ds, train_cfg: TrainConfig, cache_dir: Path | None, key: str) -> tuple[Model, bool]:
    if cache_dir is not None:
        path = cache_dir / f"model_{key}.json"
        if path.exists():
            return load_model(path), True
    model = train_default_mlp(split_ds, train_cfg)
    if cache_dir is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        save_model(model, path)
        model = load_model(path)
    return model, False


# -- ground truth -------------------------------------------------------------

@dataclass
class GroundTruth:
    phi: np.ndarray
    policy: str
    n_samples: int | None
    cache_hit: bool
    rows_evaluated: int
    key: str


def compute_ground_truth(
    model: Model,
    instances: np.ndarray,
    background: np.ndarray,
    policy: str = "auto",
    seed: int = 0,
    cache_dir: Path | None = None,
    dataset_hash: str = "",
) -> GroundTruth:
    """Exact Shapley values when tractable, else a high-budget unbiased regression estimate.

    Results are cached on disk keyed by data, model, background, instances and policy.
    """
    m = instances.shape[1]
    name, n = resolve_policy(policy, m)
    h = hashlib.sha256()
    for part in (dataset_hash, model.content_hash(), name, str(n), str(seed)):
        h.update(part.encode())
        h.update(b"\x1f")
    h.update(np.ascontiguousarray(background).tobytes())
    h.update(np.ascontiguousarray(instances).tobytes())
    key = h.hexdigest()[:20]
    path = cache_dir / f"gt_{key}.npy" if cache_dir is not None else None
    if path is not None and path.exists():
        return GroundTruth(np.load(path), name, n, True, 0, key)
    before = model.rows_evaluated
    phis = []
    for i, x in enumerate(instances):
        game = CoalitionGame(model, x, background)
        if name == "exact":
            phis.append(est.exact_shapley(game).phi)
        else:
            rng = make_rng(seed, "ground-truth", i)
            phis.append(est.unbiased_kernelshap(game, n, rng, paired_sampling=True).phi)
    phi = np.array(phis).reshape(len(instances), m)
    if path is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        np.save(path, phi)
    return GroundTruth(phi, name, n, False, model.rows_evaluated - before, key)


# -- explainer execution ------------------------------------------------------

class ExplainerRunner:
    """Uniform prepare/explain wrapper so runs and sweeps share one code path."""

    def __init__(self, spec: ExplainerSpec, model: Model, background: np.ndarray,
                 seed: int, label: str, fastshap_cfg: dict | None = None):
        self.spec, self.model, self.background = spec, model, background
        self.seed, self.label = seed, label
        self.fastshap_cfg = dict(fastshap_cfg or {})
        self.explainer: est.FastShapExplainer | None = None
        self.training_rows = 0
        self.training_seconds = 0.0

    @property
    def name(self) -> str:
        return self.spec.name

    def prepare(self, train_X: np.ndarray) -> None:
        if self.spec.name != "fastshap":
            return
        cfg = est.FastShapConfig(**{"seed": self.seed, **self.fastshap_cfg})
        before = self.model.rows_evaluated
        t0 = time.perf_counter()
        self.explainer = est.fastshap_train(self.model, train_X, self.background, cfg)
        self.training_seconds = time.perf_counter() - t0
        self.training_rows = self.model.rows_evaluated - before

    def explain(self, x: np.ndarray, index: int) -> est.Attribution:
        spec = self.spec
        rng = make_rng(self.seed, self.label, spec.name, index)
        game = CoalitionGame(self.model, x, self.background)
        if spec.name == "exact":
            att = est.exact_shapley(game)
        elif spec.name == "kernelshap":
            att = est.kernelshap(game, spec.budget, rng, full_enumeration=spec.full)
        elif spec.name == "unbiased-ks":
            att = est.unbiased_kernelshap(game, spec.budget, rng)
        elif spec.name == "monte-carlo":
            att = est.monte_carlo_shapley(game, spec.budget, rng)
        elif spec.name == "expected-grad":
            att = est.expected_gradients(self.model, x, self.background, spec.budget, rng,
                                         target_class=game.target_class)
        else:
            if self.explainer is None:
                raise RuntimeError("fastshap explainer used before prepare()")
            att = est.fastshap_explain(self.explainer, x, game)
        att.seed = self.seed
        return att


def _metric_summary(result: ev.MetricResult) -> dict:
    return {
        "mean": None if math.isnan(result.mean) else result.mean,
        "std": None if math.isnan(result.std) else result.std,
        "n_missing": result.n_missing,
        "per_sample": [None if not math.isfinite(v) else v for v in result.per_sample],
    }


def _p_distance(metric: str, summary: dict) -> float | None:
    mean = summary["mean"]
    if mean is None:
        return None
    return 1.0 - mean if ev.HIGHER_IS_BETTER[metric] else mean


def _p_scores(cells: dict, metrics: list[str]) -> dict:
    out = {}
    ok = [name for name, cell in cells.items() if cell["status"] == "ok"]
    for metric in metrics:
        pairs = [(n, _p_distance(metric, cells[n]["metrics"][metric])) for n in ok]
        pairs = [(n, d) for n, d in pairs if d is not None]
        if not pairs:
            continue
        if len(pairs) == 1:
            out[metric] = {"scores": {pairs[0][0]: 1.0}, "degenerate": True}
            continue
        res = ev.performance_p([d for _, d in pairs])
        out[metric] = {"scores": {n: p for (n, _), p in zip(pairs, res.scores)}, "degenerate": res.degenerate}
    return out


@dataclass
class BenchmarkReport:
    data: dict
    timing: dict = field(default_factory=dict)
    run_dir: Path | None = None

    def to_json(self) -> str:
        return dumps(self.data) + "\n"

    def report_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def save(self, run_dir: str | Path) -> Path:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "report.json").write_text(self.to_json(), encoding="utf-8")
        (run_dir / "report.sha256").write_text(self.report_hash() + "\n", encoding="utf-8")
        write_json(run_dir / "timing.json", self.timing)
        self.run_dir = run_dir
        return run_dir

    @classmethod
    def load(cls, run_dir: str | Path) -> "BenchmarkReport":
        run_dir = Path(run_dir)
        data = read_json(run_dir / "report.json")
        timing_path = run_dir / "timing.json"
        timing = read_json(timing_path) if timing_path.exists() else {}
        return cls(data, timing, run_dir)

    def dataset(self, name: str) -> dict:
        try:
            return self.data["datasets"][name]
        except KeyError:
            raise KeyError(f"dataset {name!r} not in report (have {sorted(self.data['datasets'])})") from None


def _pick_instances(n_val: int, k: int, seed: int, label: str) -> np.ndarray:
    if k > n_val:
        raise ConfigError(f"num_samples={k} exceeds the validation set size {n_val}")
    rng = make_rng(seed, "instances", label)
    return np.sort(rng.choice(n_val, size=k, replace=False))


def _report_skeleton(config: BenchmarkConfig) -> dict:
    return {
        "schema_version": REPORT_SCHEMA,
        "metadata": {
            "config_hash": config.config_hash(),
            "package_version": __version__,
            "kernel_backend": kernels.BACKEND,
            "seed": config.seed,
            "ground_truth_thresholds": {
                "auto_exact_max_features": AUTO_EXACT_MAX_FEATURES,
                "auto_unbiased_samples": AUTO_UNBIASED_SAMPLES,
            },
        },
        "config": config.to_dict(),
        "datasets": {},
        "sweeps": {},
    }


def _train_config(config: BenchmarkConfig) -> TrainConfig:
    return TrainConfig(**{"seed": config.seed, **config.blackbox})


def _model_key(ds: Dataset, train_cfg: TrainConfig) -> str:
    cfg_hash = hashlib.sha256(dumps(asdict(train_cfg), indent=None).encode()).hexdigest()[:12]
    return f"{ds.content_hash()}_{cfg_hash}"


def prepare_dataset(entry, config: BenchmarkConfig, cache: Path | None):
    """Load, split and train (or fetch from cache) the black box for one dataset."""
    ds, val_fraction = load_named_dataset(entry, config.seed)
    sp = split(ds, val_fraction, config.seed)
    model, cached = get_model(sp, _train_config(config), cache, _model_key(ds, _train_config(config)))
    return resolve_dataset_name(entry), ds, sp, model, cached


def run(
    config: BenchmarkConfig,
    out_dir: str | Path | None = None,
    cache_dir: str | Path | None = None,
) -> BenchmarkReport:
    """Train/load the black box per dataset, compute ground truth, run every explainer.

    A failing (dataset, explainer) cell is recorded as an error and the run continues.
    """
    config.validate()
    cache = Path(cache_dir) if cache_dir is not None else None
    out = Path(out_dir) if out_dir is not None else None
    specs = [ExplainerSpec.parse(t) for t in config.explainers]
    report = _report_skeleton(config)
    timing: dict = {"started_at": time.strftime("%Y-%m-%dT%H:%M:%S"), "datasets": {}, "sweeps": {}}
    runners_by_dataset = {}
    for entry in config.datasets:
        name, ds, sp, model, model_cached = prepare_dataset(entry, config, cache)
        if out is not None:
            (out / "models").mkdir(parents=True, exist_ok=True)
            save_model(model, out / "models" / f"{name}.json")
        background = choose_background(sp.train.X, config.background_size, config.seed, name)
        idx = _pick_instances(sp.val.n_samples, config.num_samples, config.seed, name)
        X = sp.val.X[idx]
        gt = compute_ground_truth(model, X, background, config.ground_truth, config.seed, cache,
                                  ds.content_hash())
        gt_games = [CoalitionGame(model, x, background) for x in X]
        ds_report = {
            "n_features": ds.n_features,
            "feature_names": ds.feature_names,
            "n_train": sp.train.n_samples,
            "n_val": sp.val.n_samples,
            "model": {"hash": model.content_hash(), "training_meta": model.training_meta},
            "instances": idx.tolist(),
            "target_classes": [g.target_class for g in gt_games],
            "ground_truth": {"policy": gt.policy, "n_samples": gt.n_samples, "cache_key": gt.key,
                             "phi": gt.phi},
            "explainers": {},
        }
        ds_timing = {"model_cached": model_cached, "ground_truth_cache_hit": gt.cache_hit, "explainers": {}}
        runners = {}
        csv_rows = []
        for spec in specs:
            label = spec.name
            runner = ExplainerRunner(spec, model, background, config.seed, name, config.fastshap)
            try:
                runner.prepare(sp.train.X)
                atts, walls = [], []
                before = model.rows_evaluated
                for i, x in enumerate(X):
                    t0 = time.perf_counter()
                    att = runner.explain(x, i)
                    walls.append(time.perf_counter() - t0)
                    atts.append(att)
                inference_rows = model.rows_evaluated - before
                phis = np.array([a.phi for a in atts])
                cell = {
                    "status": "ok",
                    "spec": spec.name + ("" if spec.budget is None else f":{spec.budget}") + (":full" if spec.full else ""),
                    "phi": phis,
                    "n_evaluations": [a.n_evaluations for a in atts],
                    "cost": {"training_rows": runner.training_rows, "inference_rows": inference_rows},
                    "metrics": {m: _metric_summary(ev.evaluate_metric(m, phis, gt.phi)) for m in config.metrics},
                }
                if "kendall" in config.metrics:
                    cell["metrics"]["kendall"]["global"] = _none_if_nan(ev.global_kendall(phis, gt.phi))
                if config.auc:
                    inc = np.array([ev.inclusion_curve(g, p) for g, p in zip(gt_games, phis)])
                    exc = np.array([ev.exclusion_curve(g, p) for g, p in zip(gt_games, phis)])
                    cell["auc"] = {
                        "inclusion": {"mean_curve": inc.mean(axis=0), "mean_auc": float(np.mean([ev.curve_auc(c) for c in inc]))},
                        "exclusion": {"mean_curve": exc.mean(axis=0), "mean_auc": float(np.mean([ev.curve_auc(c) for c in exc]))},
                    }
                ds_report["explainers"][label] = cell
                ds_timing["explainers"][label] = {
                    "training_seconds": runner.training_seconds,
                    "inference_seconds": float(sum(walls)),
                    "per_sample_median_seconds": float(np.median(walls)),
                }
                csv_rows.extend((int(idx[i]), a) for i, a in enumerate(atts))
                runners[label] = runner
            except Exception as exc:  # recorded per cell; the run continues
                ds_report["explainers"][label] = {
                    "status": "error",
                    "error": {"type": type(exc).__name__, "message": str(exc)},
                }
        ds_report["P"] = _p_scores(ds_report["explainers"], config.metrics)
        report["datasets"][name] = ds_report
        timing["datasets"][name] = ds_timing
        runners_by_dataset[name] = (runners, sp)
        if out is not None and csv_rows:
            est.write_attributions_csv(out / f"attributions_{name}.csv", csv_rows, ds.feature_names)
    if config.samples_sweep is not None:
        target = config.samples_sweep.dataset or resolve_dataset_name(config.datasets[0])
        if target not in runners_by_dataset:
            raise ConfigError(f"samples sweep dataset {target!r} is not part of the run")
        runners, sp = runners_by_dataset[target]
        det, wall = sweep_time_vs_samples(runners, sp.val.X, config.samples_sweep, config.seed, target)
        report["sweeps"]["samples"] = det
        timing["sweeps"]["samples"] = wall
    if config.features_sweep is not None:
        det, wall = sweep_time_vs_features(config, config.features_sweep, cache)
        report["sweeps"]["features"] = det
        timing["sweeps"]["features"] = wall
    timing["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    result = BenchmarkReport(report, timing)
    if out is not None:
        write_json(out / "config.json", config.to_dict())
        result.save(out)
        write_metrics_csv(result, out / "metrics.csv")
        from shapbench import viz

        viz.plots_from_report(result, out / "plots")
    return result


def write_metrics_csv(report: BenchmarkReport, path: Path) -> None:
    """Flat metric table: dataset, explainer, metric, mean, std, per_sample_path."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "explainer", "metric", "mean", "std", "per_sample_path"])
        for ds_name, ds in report.data["datasets"].items():
            for name, cell in ds["explainers"].items():
                for metric in report.data["config"]["metrics"]:
                    if cell["status"] != "ok":
                        w.writerow([ds_name, name, metric, "", "", ""])
                        continue
                    m = cell["metrics"][metric]
                    w.writerow([
                        ds_name, name, metric,
                        "" if m["mean"] is None else repr(m["mean"]),
                        "" if m["std"] is None else repr(m["std"]),
                        f"report.json#/datasets/{ds_name}/explainers/{name}/metrics/{metric}/per_sample",
                    ])


def run_sweep(
    config: BenchmarkConfig,
    which: str,
    out_dir: str | Path | None = None,
    cache_dir: str | Path | None = None,
) -> BenchmarkReport:
    """Only one timing sweep ("samples" or "features"), without ground truth or metrics."""
    config.validate()
    cache = Path(cache_dir) if cache_dir is not None else None
    report = _report_skeleton(config)
    timing: dict = {"started_at": time.strftime("%Y-%m-%dT%H:%M:%S"), "datasets": {}, "sweeps": {}}
    if which == "samples":
        sweep = config.samples_sweep or SamplesSweep()
        target = sweep.dataset or resolve_dataset_name(config.datasets[0])
        entry = next((e for e in config.datasets if resolve_dataset_name(e) == target), target)
        name, _, sp, model, _ = prepare_dataset(entry, config, cache)
        background = choose_background(sp.train.X, config.background_size, config.seed, name)
        runners = {}
        for text in config.explainers:
            runner = ExplainerRunner(ExplainerSpec.parse(text), model, background, config.seed, name, config.fastshap)
            runner.prepare(sp.train.X)
            runners[runner.name] = runner
        det, wall = sweep_time_vs_samples(runners, sp.val.X, sweep, config.seed, name)
    elif which == "features":
        det, wall = sweep_time_vs_features(config, config.features_sweep or FeaturesSweep(), cache)
    else:
        raise ConfigError(f"unknown sweep {which!r}")
    report["sweeps"][which] = det
    timing["sweeps"][which] = wall
    timing["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    result = BenchmarkReport(report, timing)
    if out_dir is not None:
        result.save(out_dir)
        write_json(Path(out_dir) / "config.json", config.to_dict())
    return result


def _none_if_nan(v: float):
    return None if not math.isfinite(v) else v


def has_errors(report: BenchmarkReport) -> bool:
    return any(
        cell["status"] != "ok"
        for ds in report.data["datasets"].values()
        for cell in ds["explainers"].values()
    )


# -- sweeps -------------------------------------------------------------------

def sweep_counts(max_samples: int, interval: int) -> list[int]:
    return list(range(interval, max_samples + 1, interval))


def sweep_time_vs_samples(
    runners: dict[str, ExplainerRunner],
    pool_X: np.ndarray,
    sweep: SamplesSweep,
    seed: int,
    label: str,
) -> tuple[dict, dict]:
    """Inference cost for interval, 2*interval, ..., max explained instances.

    Instances are explained once in sequence and the cumulative cost is read
    off at every checkpoint. Training (FastSHAP) is never included.
    """
    counts = sweep_counts(sweep.max, sweep.interval)
    n_pool = pool_X.shape[0]
    with_replacement = sweep.max > n_pool
    rng = make_rng(seed, "sweep-samples", label)
    if sweep.method == "random":
        order = rng.choice(n_pool, size=sweep.max, replace=with_replacement)
    else:
        order = np.arange(sweep.max) % n_pool
    det = {"dataset": label, "method": sweep.method, "counts": counts,
           "with_replacement": bool(with_replacement), "series": {}}
    wall = {}
    for name, runner in runners.items():
        rows_at, evals_at, secs_at = [], [], []
        rows = evals = 0
        secs = 0.0
        checkpoints = set(counts)
        for k, row in enumerate(order, start=1):
            before = runner.model.rows_evaluated
            t0 = time.perf_counter()
            att = runner.explain(pool_X[row], 10_000_000 + k)
            secs += time.perf_counter() - t0
            rows += runner.model.rows_evaluated - before
            evals += att.n_evaluations
            if k in checkpoints:
                rows_at.append(rows)
                evals_at.append(evals)
                secs_at.append(secs)
        det["series"][name] = {"inference_rows": rows_at, "n_evaluations": evals_at}
        wall[name] = [
            ev.TimingRecord(name, "inference", s, c, pool_X.shape[1]).to_dict()
            for s, c in zip(secs_at, counts)
        ]
    return det, wall


def sweep_time_vs_features(
    config: BenchmarkConfig,
    sweep: FeaturesSweep,
    cache_dir: Path | None = None,
) -> tuple[dict, dict]:
    """For each M: linear synthetic data, a fresh black box, then timed inference."""
    specs = [ExplainerSpec.parse(t) for t in config.explainers]
    train_cfg = _train_config(config)
    det = {"m_list": list(sweep.m_list), "n_instances": sweep.n_instances, "series": {}}
    wall: dict = {}
    for spec in specs:
        det["series"][spec.name] = {"m": [], "inference_rows": [], "n_evaluations": [], "skipped": {}}
        wall[spec.name] = []
    for m in sweep.m_list:
        ds, _ = make_synthetic(SyntheticSpec(m, sweep.n_synthetic, "linear", config.seed, with_oracle=m <= 25))
        sp = split(ds, 0.2, config.seed)
        model, _ = get_model(sp, train_cfg, cache_dir, _model_key(ds, train_cfg))
        background = choose_background(sp.train.X, config.background_size, config.seed, ds.name)
        X = sp.val.X[: sweep.n_instances]
        for spec in specs:
            series = det["series"][spec.name]
            if spec.name == "exact" and m > SWEEP_EXACT_MAX_FEATURES:
                series["skipped"][str(m)] = f"exact skipped beyond M={SWEEP_EXACT_MAX_FEATURES}"
                continue
            runner = ExplainerRunner(spec, model, background, config.seed, ds.name, config.fastshap)
            try:
                runner.prepare(sp.train.X)
                before = model.rows_evaluated
                evals = 0
                t0 = time.perf_counter()
                for i, x in enumerate(X):
                    evals += runner.explain(x, i).n_evaluations
                secs = time.perf_counter() - t0
            except Exception as exc:
                series["skipped"][str(m)] = f"{type(exc).__name__}: {exc}"
                continue
            series["m"].append(m)
            series["inference_rows"].append(model.rows_evaluated - before)
            series["n_evaluations"].append(evals)
            rec = ev.TimingRecord(spec.name, "inference", secs, len(X), m).to_dict()
            if runner.training_seconds:
                rec["training_seconds"] = runner.training_seconds
            wall[spec.name].append(rec)
    return det, wall


# -- tables -------------------------------------------------------------------

GAP = "--"


def _fmt(v, precision: int) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return GAP
    return format(float(v), f".{precision}g")


def results_table(report: BenchmarkReport, dataset: str, precision: int = 6) -> tuple[list[str], list[list[str]]]:
    ds = report.dataset(dataset)
    metrics = list(report.data["config"]["metrics"])
    primary = report.data["config"].get("primary_metric", "l2")
    if primary not in metrics:
        primary = metrics[0]
    header = ["explainer", *metrics, f"P({primary})", "train_s", "infer_s"]
    times = report.timing.get("datasets", {}).get(dataset, {}).get("explainers", {})
    p_scores = ds.get("P", {}).get(primary, {}).get("scores", {})
    rows = []
    for name, cell in ds["explainers"].items():
        if cell["status"] != "ok":
            rows.append([name, *([GAP] * (len(header) - 1))])
            continue
        t = times.get(name, {})
        rows.append([
            name,
            *(_fmt(cell["metrics"][m]["mean"], precision) for m in metrics),
            _fmt(p_scores.get(name), precision),
            _fmt(t.get("training_seconds"), precision),
            _fmt(t.get("inference_seconds"), precision),
        ])
    return header, rows


def print_results(report: BenchmarkReport, dataset: str, precision: int = 6) -> str:
    """Plain-text table: one row per explainer, metrics then P then times. Errors show as '--'."""
    header, rows = results_table(report, dataset, precision)
    widths = [max(len(r[j]) for r in [header, *rows]) for j in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    errors = [
        f"{n}: {c['error']['type']}: {c['error']['message']}"
        for n, c in report.dataset(dataset)["explainers"].items()
        if c["status"] != "ok"
    ]
    if errors:
        lines.append("")
        lines += [f"error in {e}" for e in errors]
    return "\n".join(lines)
