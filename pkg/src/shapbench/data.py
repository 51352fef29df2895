"""Tabular datasets: loaders, stratified splits, standardization, synthetic games."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from shapbench.rng import make_rng
from shapbench.serialize import read_json, write_json

CONTINUOUS = "continuous"
ORDINAL = "categorical-ordinal"
MISSING_TOKENS = {"", "?", "na", "nan", "null"}
MAX_ORACLE_FEATURES = 25


class DataFormatError(ValueError):
    pass


@dataclass(eq=False)
class Dataset:
    name: str
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    n_classes: int
    feature_kinds: list[str] = field(default_factory=list)
    label_mapping: list[str] = field(default_factory=list)
    n_dropped: int = 0

    def __post_init__(self):
        self.X = np.array(self.X, dtype=np.float64, ndmin=2)
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if self.X.shape[0] != self.y.shape[0]:
            raise DataFormatError(f"{self.X.shape[0]} rows in X but {self.y.shape[0]} labels")
        if not self.feature_kinds:
            self.feature_kinds = [CONTINUOUS] * self.X.shape[1]
        if not self.label_mapping:
            self.label_mapping = [str(k) for k in range(self.n_classes)]
        if len(self.feature_names) != self.X.shape[1]:
            raise DataFormatError("feature_names length does not match X columns")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.n_classes):
            raise DataFormatError("labels must lie in [0, n_classes)")
        if not np.all(np.isfinite(self.X)):
            raise DataFormatError("X contains non-finite values")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, rows: np.ndarray, name: str | None = None) -> "Dataset":
        return replace(self, name=name or self.name, X=self.X[rows], y=self.y[rows], n_dropped=0)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        h.update("\x1f".join(self.feature_names + self.feature_kinds).encode())
        return h.hexdigest()[:16]


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, ds: Dataset) -> "Standardizer":
        mean = ds.X.mean(axis=0)
        std = ds.X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        for j, kind in enumerate(ds.feature_kinds):
            if kind != CONTINUOUS:
                mean[j], std[j] = 0.0, 1.0
        return cls(mean, std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Standardizer":
        return cls(np.asarray(doc["mean"], dtype=np.float64), np.asarray(doc["std"], dtype=np.float64))

    @classmethod
    def identity(cls, n_features: int) -> "Standardizer":
        return cls(np.zeros(n_features), np.ones(n_features))


@dataclass
class SplitDataset:
    train: Dataset
    val: Dataset
    standardizer: Standardizer
    train_rows: np.ndarray
    val_rows: np.ndarray


def _label_order(labels: list[str]) -> list[str]:
    def key(s: str):
        try:
            return (0, float(s), s)
        except ValueError:
            return (1, 0.0, s)

    return sorted(set(labels), key=key)


def _encode_labels(raw: list[str]) -> tuple[np.ndarray, list[str]]:
    mapping = _label_order(raw)
    if len(mapping) < 2:
        raise DataFormatError(f"need at least two classes, found {mapping}")
    index = {lab: k for k, lab in enumerate(mapping)}
    return np.array([index[lab] for lab in raw], dtype=np.int64), mapping


def load_csv(
    path: str | Path,
    label_column: str | int = -1,
    delimiter: str = ",",
    name: str | None = None,
    ordinal_columns: list[str] | None = None,
) -> Dataset:
    """Read a headed CSV; rows with a missing cell are dropped and counted."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [r for r in rows if r]
    if len(rows) < 3:
        raise DataFormatError(f"{path}: need a header and at least 2 data rows")
    header = [h.strip() for h in rows[0]]
    if isinstance(label_column, int):
        label_idx = label_column % len(header)
    else:
        if label_column not in header:
            raise DataFormatError(f"{path}: label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
    feature_idx = [j for j in range(len(header)) if j != label_idx]
    X_rows, labels, dropped = [], [], 0
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {line_no} has {len(row)} cells, expected {len(header)}")
        cells = [c.strip() for c in row]
        if any(c.lower() in MISSING_TOKENS for c in cells):
            dropped += 1
            continue
        values = []
        for j in feature_idx:
            try:
                values.append(float(cells[j]))
            except ValueError:
                raise DataFormatError(
                    f"{path}: cannot parse {cells[j]!r} at row {line_no}, column {header[j]!r}"
                ) from None
        X_rows.append(values)
        labels.append(cells[label_idx])
    y, mapping = _encode_labels(labels)
    names = [header[j] for j in feature_idx]
    ordinal = set(ordinal_columns or [])
    kinds = [ORDINAL if n in ordinal else CONTINUOUS for n in names]
    return Dataset(
        name=name or path.stem,
        X=np.array(X_rows, dtype=np.float64).reshape(len(X_rows), len(names)),
        y=y,
        feature_names=names,
        n_classes=len(mapping),
        feature_kinds=kinds,
        label_mapping=mapping,
        n_dropped=dropped,
    )


MONKS_FEATURES = ["a1", "a2", "a3", "a4", "a5", "a6"]


def load_monks(*paths: str | Path, name: str = "monks") -> Dataset:
    """UCI monks format: ``class a1 .. a6 id`` per line, whitespace separated."""
    if not paths:
        paths = (bundled_path("monks-1.data"),)
    X_rows, labels = [], []
    for path in paths:
        for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 8:
                raise DataFormatError(f"{path}: line {line_no} has {len(tokens)} fields, expected 8")
            try:
                X_rows.append([float(t) for t in tokens[1:7]])
            except ValueError:
                raise DataFormatError(f"{path}: non-numeric attribute on line {line_no}") from None
            labels.append(tokens[0])
    y, mapping = _encode_labels(labels)
    return Dataset(
        name=name,
        X=np.array(X_rows),
        y=y,
        feature_names=list(MONKS_FEATURES),
        n_classes=len(mapping),
        feature_kinds=[ORDINAL] * 6,
        label_mapping=mapping,
    )


WBC_FEATURES = [
    "clump_thickness",
    "uniformity_cell_size",
    "uniformity_cell_shape",
    "marginal_adhesion",
    "single_epithelial_cell_size",
    "bare_nuclei",
    "bland_chromatin",
    "normal_nucleoli",
    "mitoses",
]


def load_wbc(path: str | Path | None = None) -> Dataset:
    path = path or bundled_path("wbc-sample.csv")
    return load_csv(path, label_column="class", name="wbc")


def bundled_path(filename: str) -> Path:
    return Path(str(resources.files("shapbench") / "fixtures" / filename))


def _stratified_counts(class_sizes: np.ndarray, n_val: int) -> np.ndarray:
    total = class_sizes.sum()
    quotas = class_sizes * n_val / total
    counts = np.floor(quotas).astype(np.int64)
    remainder = n_val - counts.sum()
    order = np.argsort(-(quotas - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts


def split(dataset: Dataset, val_fraction: float = 0.2, seed: int = 0) -> SplitDataset:
    """Stratified train/validation split; the standardizer is fitted on train only.

    The validation size is ``ceil(n * val_fraction)`` allocated across classes by
    largest remainder, so per-class counts are within one of proportional.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must be in (0, 1), got {val_fraction}")
    class_sizes = np.bincount(dataset.y, minlength=dataset.n_classes)
    if np.any(class_sizes < 2):
        small = [dataset.label_mapping[k] for k in np.flatnonzero(class_sizes < 2)]
        raise DataFormatError(f"classes {small} have fewer than 2 samples; cannot stratify")
    n_val = math.ceil(dataset.n_samples * val_fraction - 1e-9)
    counts = _stratified_counts(class_sizes, n_val)
    counts = np.clip(counts, 1, class_sizes - 1)
    rng = make_rng(seed, "split", dataset.name)
    val_rows = []
    for k in range(dataset.n_classes):
        members = np.flatnonzero(dataset.y == k)
        val_rows.append(rng.permutation(members)[: counts[k]])
    val_rows = np.sort(np.concatenate(val_rows))
    train_rows = np.setdiff1d(np.arange(dataset.n_samples), val_rows)
    train_raw = dataset.subset(train_rows, dataset.name)
    standardizer = Standardizer.fit(train_raw)
    train = replace(train_raw, X=standardizer.transform(train_raw.X))
    val_raw = dataset.subset(val_rows, dataset.name)
    val = replace(val_raw, X=standardizer.transform(val_raw.X))
    return SplitDataset(train, val, standardizer, train_rows, val_rows)


@dataclass
class SyntheticSpec:
    n_features: int
    n_samples: int = 1000
    generator: str = "linear"
    seed: int = 0
    true_weights: np.ndarray | None = None
    with_oracle: bool = True


def make_synthetic(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray | None]:
    """Generate a labelled dataset; the linear generator also returns its weights."""
    m = spec.n_features
    if m < 1:
        raise ValueError("n_features must be at least 1")
    if spec.generator == "linear" and spec.with_oracle and m > MAX_ORACLE_FEATURES:
        raise ValueError(
            f"linear generator with oracle supports at most {MAX_ORACLE_FEATURES} features, got {m}"
        )
    rng = make_rng(spec.seed, "synthetic", spec.generator, m, spec.n_samples)
    X = rng.standard_normal((spec.n_samples, m))
    weights = None
    if spec.generator == "linear":
        if spec.true_weights is not None:
            weights = np.asarray(spec.true_weights, dtype=np.float64).reshape(-1)
            if weights.shape[0] != m:
                raise ValueError("true_weights length must equal n_features")
        else:
            weights = rng.uniform(0.5, 3.0, size=m) * rng.choice([-1.0, 1.0], size=m)
        score = X @ weights
        y = (score > np.median(score)).astype(np.int64)
    elif spec.generator == "xor-like":
        if m < 2:
            raise ValueError("xor-like generator needs at least 2 features")
        y = (X[:, 0] * X[:, 1] > 0).astype(np.int64)
    elif spec.generator == "gaussian-mixture":
        y = rng.integers(0, 2, size=spec.n_samples)
        direction = rng.standard_normal(m)
        direction /= np.linalg.norm(direction)
        X = X + np.outer(2.0 * y - 1.0, 1.5 * direction)
    else:
        raise ValueError(f"unknown generator {spec.generator!r}")
    ds = Dataset(
        name=f"synthetic-{spec.generator}-{m}",
        X=X,
        y=y,
        feature_names=[f"x{j}" for j in range(m)],
        n_classes=2,
    )
    return ds, weights


def save_dataset(ds: Dataset, path: str | Path) -> Path:
    """Persist as ``<path>.csv`` plus a ``<path>.json`` sidecar. Returns the CSV path."""
    base = Path(path)
    csv_path = base.with_suffix(".csv")
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*ds.feature_names, "label"])
        for row, label in zip(ds.X, ds.y):
            writer.writerow([format(v, ".17g") for v in row] + [int(label)])
    write_json(
        base.with_suffix(".json"),
        {
            "name": ds.name,
            "feature_names": ds.feature_names,
            "feature_kinds": ds.feature_kinds,
            "label_mapping": ds.label_mapping,
            "n_classes": ds.n_classes,
        },
    )
    return csv_path


def load_dataset(path: str | Path) -> Dataset:
    base = Path(path)
    meta = read_json(base.with_suffix(".json"))
    with base.with_suffix(".csv").open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    X = np.array([[float(c) for c in r[:-1]] for r in body], dtype=np.float64)
    y = np.array([int(r[-1]) for r in body], dtype=np.int64)
    return Dataset(
        name=meta["name"],
        X=X.reshape(len(body), len(meta["feature_names"])),
        y=y,
        feature_names=meta["feature_names"],
        n_classes=meta["n_classes"],
        feature_kinds=meta["feature_kinds"],
        label_mapping=meta["label_mapping"],
    )
