"""End-to-end experiment harness: dataset -> split -> Gram -> SVM -> report.

Reports are JSON documents fully reconstructible from (spec, seed): the spec
is embedded, its hash stamps every output file, and the only
non-reproducible fields live under the top-level "timings" key.  File writes
are whole-file atomic (write to a temp file, then rename).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import (
    ColumnScaler,
    LabeledDataset,
    PcaModel,
    SplitSpec,
    load_csv,
    make_circles,
    make_moons,
    make_spirals,
    pca_fit,
    pca_transform,
    select_features,
    split,
    standardize_apply,
    standardize_fit,
)
from .errors import InvalidDimensionError, InvalidInputError
from .fock import DEFAULT_CUTOFF, SqueezeParams, circuit_kernel
from .kernel import KernelConfig, gamma_from_squeeze, kernel_scalar
from .svm import (
    MulticlassModel,
    SvmConfig,
    SvmModel,
    accuracy,
    decision_values,
    predict_labels,
    save_model,
    train_multiclass,
)

REPORT_FORMAT_VERSION = 1

#: Default decision-boundary lattice edge length.
DEFAULT_BOUNDARY_RESOLUTION = 200

#: Fraction of each axis range added as padding on either side of a
#: boundary-grid bounding box.
BOUNDARY_PADDING = 0.10

GENERATOR_DEFAULTS = {
    "moons": {"noise_sigma": 0.15},
    "circles": {"noise_sigma": 0.08, "radius_ratio": 0.5},
    "spirals": {"noise_sigma": 0.5, "turns": 2.0},
}


@dataclass(frozen=True)
class GeneratorSpec:
    """Synthetic dataset descriptor; noise defaults depend on the kind."""

    kind: str
    n: int = 300
    noise_sigma: float | None = None
    radius_ratio: float = 0.5
    turns: float = 2.0

    def __post_init__(self):
        if self.kind not in GENERATOR_DEFAULTS:
            raise InvalidInputError(f"unknown generator kind: {self.kind!r}")
        if self.noise_sigma is None:
            object.__setattr__(
                self, "noise_sigma", GENERATOR_DEFAULTS[self.kind]["noise_sigma"]
            )

    def to_dict(self) -> dict:
        d = {"source": "generator", "kind": self.kind, "n": self.n,
             "noise_sigma": self.noise_sigma}
        if self.kind == "circles":
            d["radius_ratio"] = self.radius_ratio
        if self.kind == "spirals":
            d["turns"] = self.turns
        return d


@dataclass(frozen=True)
class FileSpec:
    """CSV dataset descriptor with optional feature selection and PCA.

    When ``pca_components`` is set, the whole file is standardized and
    reduced before splitting, mirroring the usual single-split benchmark
    workflow; the split-level ``standardize`` flag remains train-fitted.
    """

    path: str
    label_column: str = "label"
    feature_columns: tuple[str, ...] | None = None
    pca_components: int | None = None

    def to_dict(self) -> dict:
        return {
            "source": "file",
            "path": str(self.path),
            "label_column": self.label_column,
            "feature_columns": list(self.feature_columns) if self.feature_columns else None,
            "pca_components": self.pca_components,
        }


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one train/evaluate run byte-for-byte."""

    dataset: GeneratorSpec | FileSpec
    gammas: tuple[float, ...]
    c: float = 1.0
    tol: float = 1e-3
    max_passes: int = 200
    train_fraction: float = 0.7
    stratified: bool = True
    standardize: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.gammas:
            raise InvalidInputError("gamma list must be non-empty")
        for g in self.gammas:
            if not (math.isfinite(g) and g > 0.0):
                raise InvalidInputError(f"gammas must be positive, got {g}")
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.to_dict(),
            "gammas": list(self.gammas),
            "c": self.c,
            "tol": self.tol,
            "max_passes": self.max_passes,
            "train_fraction": self.train_fraction,
            "stratified": self.stratified,
            "standardize": self.standardize,
            "seed": self.seed,
        }

    def spec_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


def spec_from_dict(d: dict) -> ExperimentSpec:
    ds = d["dataset"]
    if ds["source"] == "generator":
        dataset = GeneratorSpec(
            kind=ds["kind"],
            n=ds["n"],
            noise_sigma=ds["noise_sigma"],
            radius_ratio=ds.get("radius_ratio", 0.5),
            turns=ds.get("turns", 2.0),
        )
    else:
        dataset = FileSpec(
            path=ds["path"],
            label_column=ds["label_column"],
            feature_columns=tuple(ds["feature_columns"]) if ds["feature_columns"] else None,
            pca_components=ds["pca_components"],
        )
    return ExperimentSpec(
        dataset=dataset,
        gammas=tuple(d["gammas"]),
        c=d["c"],
        tol=d["tol"],
        max_passes=d["max_passes"],
        train_fraction=d["train_fraction"],
        stratified=d["stratified"],
        standardize=d["standardize"],
        seed=d["seed"],
    )


def build_dataset(dataset_spec: GeneratorSpec | FileSpec, seed: int) -> LabeledDataset:
    """Materialize a dataset descriptor (generators consume the given seed)."""
    if isinstance(dataset_spec, GeneratorSpec):
        if dataset_spec.kind == "moons":
            return make_moons(dataset_spec.n, dataset_spec.noise_sigma, seed)
        if dataset_spec.kind == "circles":
            return make_circles(
                dataset_spec.n, dataset_spec.radius_ratio, dataset_spec.noise_sigma, seed
            )
        return make_spirals(dataset_spec.n, dataset_spec.turns, dataset_spec.noise_sigma, seed)
    ds = load_csv(dataset_spec.path, dataset_spec.label_column,
                  list(dataset_spec.feature_columns) if dataset_spec.feature_columns else None)
    if dataset_spec.pca_components is not None:
        scaler = standardize_fit(ds)
        ds = standardize_apply(scaler, ds)
        ds = pca_transform(pca_fit(ds, dataset_spec.pca_components), ds)
    return ds


@dataclass(frozen=True)
class ExperimentRow:
    gamma: float
    train_acc: float
    test_acc: float
    n_sv: int
    converged: bool
    is_baseline: bool
    wall_time_s: float

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "train_acc": self.train_acc,
            "test_acc": self.test_acc,
            "n_sv": self.n_sv,
            "converged": self.converged,
            "is_baseline": self.is_baseline,
        }


@dataclass(frozen=True)
class ExperimentReport:
    spec: ExperimentSpec
    rows: tuple[ExperimentRow, ...]
    dataset_provenance: dict
    selected_gamma: float | None = None
    models: dict = field(default_factory=dict, repr=False)

    def baseline_row(self) -> ExperimentRow:
        return next(r for r in self.rows if r.is_baseline)

    def row_for(self, gamma: float) -> ExperimentRow:
        return next(r for r in self.rows if r.gamma == gamma)

    def to_json_dict(self) -> dict:
        baseline = self.baseline_row()
        doc = {
            "version": REPORT_FORMAT_VERSION,
            "spec_hash": self.spec.spec_hash(),
            "seed": self.spec.seed,
            "spec": self.spec.to_dict(),
            "dataset_provenance": self.dataset_provenance,
            "rows": [r.to_dict() for r in self.rows],
            "deltas_vs_baseline": {
                repr(r.gamma): r.test_acc - baseline.test_acc for r in self.rows
            },
            "timings": {repr(r.gamma): r.wall_time_s for r in self.rows},
        }
        if self.selected_gamma is not None:
            doc["selected_gamma"] = self.selected_gamma
        return doc


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: ExperimentReport, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    _atomic_write_text(path, json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")
    for gamma, model in report.models.items():
        save_model(
            out_dir / f"model_gamma_{gamma!r}.json",
            model,
            extra={"spec_hash": report.spec.spec_hash(), "gamma": gamma},
        )
    return path


def reports_equal_ignoring_timings(a: dict, b: dict) -> bool:
    a, b = dict(a), dict(b)
    a.pop("timings", None)
    b.pop("timings", None)
    return json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def run_experiment(spec: ExperimentSpec, out_dir=None) -> ExperimentReport:
    """Split, optionally standardize, and train/evaluate one SVM per gamma.

    A gamma = 1.0 baseline row is always present (appended when missing from
    the spec) and flagged ``is_baseline``.
    """
    dataset = build_dataset(spec.dataset, spec.seed)
    train_ds, test_ds = split(
        dataset, SplitSpec(spec.train_fraction, spec.seed, spec.stratified)
    )
    if spec.standardize:
        scaler = standardize_fit(train_ds)
        train_ds = standardize_apply(scaler, train_ds)
        test_ds = standardize_apply(scaler, test_ds)

    gammas = list(spec.gammas)
    if 1.0 not in gammas:
        gammas.append(1.0)

    rows = []
    models = {}
    for gamma in gammas:
        started = time.perf_counter()
        config = SvmConfig(
            c=spec.c, tol=spec.tol, max_passes=spec.max_passes,
            kernel=KernelConfig.direct(gamma),
        )
        model = train_multiclass(train_ds, config, spec.seed)
        train_acc = accuracy(model, train_ds)
        test_acc = accuracy(model, test_ds)
        rows.append(
            ExperimentRow(
                gamma=gamma,
                train_acc=train_acc,
                test_acc=test_acc,
                n_sv=sum(m.n_support for _, m in model.machines),
                converged=all(m.converged for _, m in model.machines),
                is_baseline=(gamma == 1.0),
                wall_time_s=time.perf_counter() - started,
            )
        )
        models[gamma] = model

    report = ExperimentReport(
        spec=spec,
        rows=tuple(rows),
        dataset_provenance=dataset.provenance,
        models=models,
    )
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def select_gamma(rows) -> float:
    """Best test accuracy; ties prefer the gamma nearest 1 in log distance
    (rounded to 1e-12), then the larger gamma."""
    def key(row):
        return (-row.test_acc, round(abs(math.log(row.gamma)), 12), -row.gamma)

    return min(rows, key=key).gamma


def sweep(spec: ExperimentSpec, gamma_grid, out_dir=None) -> ExperimentReport:
    """Run the experiment over a gamma grid and record the selected gamma.

    The always-present baseline row competes in the selection, so the chosen
    gamma never scores below gamma = 1.0 on test accuracy.
    """
    grid = tuple(float(g) for g in gamma_grid)
    if not grid:
        raise InvalidInputError("gamma grid must be non-empty")
    report = run_experiment(replace(spec, gammas=grid))
    report = ExperimentReport(
        spec=report.spec,
        rows=report.rows,
        dataset_provenance=report.dataset_provenance,
        selected_gamma=select_gamma(report.rows),
        models=report.models,
    )
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def boundary_grid(
    model: SvmModel | MulticlassModel,
    bounds,
    resolution: int,
    out_path,
) -> Path:
    """Decision values over a lattice spanning ``bounds`` padded 10% per side.

    Only defined for 2-feature models.  Rows are written x2-major (x1 varies
    fastest) as ``x1,x2,decision_value,label``.  For one-vs-one models the
    decision value is the summed signed decision value toward the predicted
    class over the machines it participates in.
    """
    if resolution < 2:
        raise InvalidInputError(f"resolution must be >= 2, got {resolution}")
    if isinstance(model, MulticlassModel):
        dim = model.machines[0][1].support_vectors.shape[1]
    else:
        dim = model.support_vectors.shape[1]
    if dim != 2:
        raise InvalidDimensionError(f"boundary grids need 2-feature models, got {dim}")
    (x1_lo, x1_hi), (x2_lo, x2_hi) = bounds
    pad1 = BOUNDARY_PADDING * (x1_hi - x1_lo)
    pad2 = BOUNDARY_PADDING * (x2_hi - x2_lo)
    xs = np.linspace(x1_lo - pad1, x1_hi + pad1, resolution)
    ys = np.linspace(x2_lo - pad2, x2_hi + pad2, resolution)
    grid = np.array([(x, y) for y in ys for x in xs])

    if isinstance(model, MulticlassModel):
        labels = predict_labels(model, grid)
        values = np.zeros(len(grid))
        for (neg, pos), machine in model.machines:
            d = decision_values(machine, grid)
            values += np.where(labels == pos, d, 0.0) - np.where(labels == neg, d, 0.0)
    else:
        values = decision_values(model, grid)
        neg, pos = model.labels
        labels = np.where(values >= 0.0, pos, neg)

    lines = ["x1,x2,decision_value,label"]
    for (x, y), v, lab in zip(grid, values, labels):
        lines.append(f"{float(x)!r},{float(y)!r},{float(v)!r},{int(lab)}")
    out_path = Path(out_path)
    _atomic_write_text(out_path, "\n".join(lines) + "\n")
    return out_path


def apply_transform_chain(dataset: LabeledDataset, chain: list[dict]) -> LabeledDataset:
    """Replay a serialized preprocessing pipeline (select / standardize / pca).

    Model files written by the CLI store such a chain so evaluation can map a
    raw CSV into the feature space a model was trained in.
    """
    for entry in chain:
        kind = entry["kind"]
        if kind == "select":
            dataset = select_features(dataset, list(entry["names"]))
        elif kind == "standardize":
            dataset = standardize_apply(ColumnScaler.from_dict(entry["scaler"]), dataset)
        elif kind == "pca":
            dataset = pca_transform(PcaModel.from_dict(entry["model"]), dataset)
        else:
            raise InvalidInputError(f"unknown transform kind: {kind!r}")
    return dataset


def simulate_overlap(
    xp: float, xq: float, r: float, theta: float, cutoff: int = DEFAULT_CUTOFF
) -> dict:
    """Detection probability from the truncated simulator next to the closed
    form, with their absolute difference; the user-facing oracle window."""
    eta = SqueezeParams(r, theta)
    probability = circuit_kernel(xp, xq, eta, cutoff)
    closed_form = kernel_scalar(xp, xq, gamma_from_squeeze(eta))
    return {
        "xp": float(xp),
        "xq": float(xq),
        "r": eta.r,
        "theta": eta.theta,
        "cutoff": cutoff,
        "probability": probability,
        "closed_form": closed_form,
        "abs_error": abs(probability - closed_form),
    }
