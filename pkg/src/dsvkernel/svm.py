"""Kernel support vector machine trained by sequential two-variable updates.

The soft-margin dual

    maximize  sum(alpha) - 1/2 sum_pq alpha_p alpha_q y_p y_q K_pq
    subject to  0 <= alpha <= C  and  sum(alpha * y) = 0

is solved on a precomputed Gram matrix by analytically optimizing one pair
of dual variables at a time (Platt-style).  The first variable of each pair
is drawn from a seeded random sweep over KKT violators; the second is chosen
to maximize |E_i - E_j|, with seeded fallback scans when that step stalls.
Convergence means no variable violates its KKT condition beyond ``tol``.

Multiclass problems train one binary machine per class pair and predict by
majority vote.  Trained models are immutable; prediction is pure and may run
in parallel, while a single training run is inherently sequential.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    DegenerateLabelsError,
    InvalidDimensionError,
    InvalidInputError,
)
from .kernel import GramMatrix, KernelConfig, gram, gram_cross, kernel_vec
from .rng import SplitMix64

#: Dual variables at or below this value are treated as zero when support
#: vectors are extracted.
ALPHA_PRUNE = 1e-8

#: Error caches are rebuilt from scratch this often to bound drift.
CACHE_REBUILD_SWEEPS = 50

#: RNG stream id for binary training sweeps; one-vs-one machines shift it.
STREAM_SMO = 20

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SvmConfig:
    """Box constraint, KKT tolerance, sweep budget and kernel choice.

    C = 1e6 or larger effectively recovers a hard margin.
    """

    c: float = 1.0
    tol: float = 1e-3
    max_passes: int = 200
    kernel: KernelConfig = KernelConfig(gamma=1.0)

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0.0):
            raise InvalidInputError(f"c must be positive, got {self.c}")
        if not (math.isfinite(self.tol) and self.tol > 0.0):
            raise InvalidInputError(f"tol must be positive, got {self.tol}")
        if self.max_passes < 1:
            raise InvalidInputError(f"max_passes must be >= 1, got {self.max_passes}")


@dataclass(frozen=True)
class SvmModel:
    """Binary classifier state: support vectors with their dual coefficients.

    ``labels`` maps the internal signs to class labels as
    (negative-class, positive-class); an exact zero decision value is
    predicted as the positive class.
    """

    support_indices: np.ndarray
    alphas: np.ndarray
    sv_labels: np.ndarray
    support_vectors: np.ndarray
    bias: float
    labels: tuple[int, int]
    kernel: KernelConfig
    converged: bool
    objective_history: tuple[float, ...]

    def __post_init__(self):
        for name in ("support_indices", "alphas", "sv_labels", "support_vectors"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_support(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True)
class MulticlassModel:
    """One-vs-one ensemble: L(L-1)/2 binary machines over sorted class pairs."""

    machines: tuple[tuple[tuple[int, int], SvmModel], ...]
    classes: tuple[int, ...]


def _dual_objective(alpha: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


class _PairwiseOptimizer:
    """Mutable SMO state; single use per training run."""

    def __init__(self, K, y, c, tol, max_passes, rng):
        self.K = K
        self.y = y
        self.c = c
        self.tol = tol
        self.max_passes = max_passes
        self.rng = rng
        m = len(y)
        self.alpha = np.zeros(m)
        self.b = 0.0
        self.errors = -y.astype(float)  # f(x) - y with f = 0
        self.objective_history: list[float] = []

    def _violations(self) -> np.ndarray:
        r = self.errors * self.y
        at_zero = self.alpha <= ALPHA_PRUNE
        at_c = self.alpha >= self.c * (1.0 - 1e-8)
        return ((r < -self.tol) & ~at_c) | ((r > self.tol) & ~at_zero)

    def _step(self, i: int, j: int) -> bool:
        if i == j:
            return False
        alpha, y, K, c = self.alpha, self.y, self.K, self.c
        ai, aj = alpha[i], alpha[j]
        yi, yj = y[i], y[j]
        ei, ej = self.errors[i], self.errors[j]
        if yi != yj:
            lo, hi = max(0.0, aj - ai), min(c, c + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - c), min(c, ai + aj)
        if hi - lo < 1e-12:
            return False
        curvature = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if curvature > 1e-12:
            aj_new = aj + yj * (ei - ej) / curvature
            aj_new = min(hi, max(lo, aj_new))
        else:
            # flat (duplicate rows): the pair objective is linear, move to an end
            slope = yj * (ei - ej)
            if slope > 1e-15:
                aj_new = hi
            elif slope < -1e-15:
                aj_new = lo
            else:
                return False
        if abs(aj_new - aj) < 1e-12 * (aj_new + aj + 1e-12):
            return False
        ai_new = ai + yi * yj * (aj - aj_new)
        ai_new = min(c, max(0.0, ai_new))
        # land exactly on a bound when roundoff leaves us a hair away
        snap = 1e-12 * max(1.0, c)
        if ai_new < snap:
            ai_new = 0.0
        elif c - ai_new < snap:
            ai_new = c
        if aj_new < snap:
            aj_new = 0.0
        elif c - aj_new < snap:
            aj_new = c
        dai, daj = ai_new - ai, aj_new - aj

        b1 = self.b - ei - yi * dai * K[i, i] - yj * daj * K[i, j]
        b2 = self.b - ej - yi * dai * K[i, j] - yj * daj * K[j, j]
        if 0.0 < ai_new < c:
            b_new = b1
        elif 0.0 < aj_new < c:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        self.errors += yi * dai * K[i] + yj * daj * K[j] + (b_new - self.b)
        alpha[i], alpha[j] = ai_new, aj_new
        self.b = b_new
        return True

    def _examine(self, i: int) -> bool:
        r = self.errors[i] * self.y[i]
        at_zero = self.alpha[i] <= ALPHA_PRUNE
        at_c = self.alpha[i] >= self.c * (1.0 - 1e-8)
        if not ((r < -self.tol and not at_c) or (r > self.tol and not at_zero)):
            return False
        m = len(self.y)
        non_bound = np.flatnonzero((self.alpha > 0.0) & (self.alpha < self.c))
        if len(non_bound) > 1:
            gaps = np.abs(self.errors[non_bound] - self.errors[i])
            gaps[non_bound == i] = -1.0
            if self._step(i, int(non_bound[int(np.argmax(gaps))])):
                return True
        if len(non_bound):
            start = self.rng.randbelow(len(non_bound))
            for k in range(len(non_bound)):
                j = int(non_bound[(start + k) % len(non_bound)])
                if self._step(i, j):
                    return True
        start = self.rng.randbelow(m)
        for k in range(m):
            if self._step(i, (start + k) % m):
                return True
        return False

    def _kkt_satisfiable(self) -> bool:
        """Bias-independent convergence test.

        KKT within tol holds for SOME bias iff the interval of biases allowed
        by the margin inequalities is non-empty; the running b is only a
        working value and may sit off-center.
        """
        g = (self.alpha * self.y) @ self.K
        v = self.y - g
        at_zero = self.alpha <= ALPHA_PRUNE
        at_c = self.alpha >= self.c * (1.0 - 1e-8)
        free = ~at_zero & ~at_c
        pos, neg = self.y > 0, self.y < 0
        lower = free | (at_zero & pos) | (at_c & neg)
        upper = free | (at_zero & neg) | (at_c & pos)
        b_lo = v[lower].max() - self.tol if lower.any() else -math.inf
        b_hi = v[upper].min() + self.tol if upper.any() else math.inf
        return b_lo <= b_hi

    def _recenter_bias(self) -> None:
        self.b = _extract_bias(self.alpha, self.y, self.K, self.c)
        self.errors = (self.alpha * self.y) @ self.K + self.b - self.y

    def run(self) -> bool:
        m = len(self.y)
        total_cap = max(50 * self.max_passes, 1000)
        stalled = 0
        previous = -math.inf
        for sweep in range(1, total_cap + 1):
            changed = 0
            for i in self.rng.permutation(m):
                if self._examine(int(i)):
                    changed += 1
            if sweep % CACHE_REBUILD_SWEEPS == 0:
                self.errors = (self.alpha * self.y) @ self.K + self.b - self.y
            objective = _dual_objective(self.alpha, self.K, self.y)
            self.objective_history.append(objective)
            if changed == 0:
                if self._kkt_satisfiable():
                    return True
                # the pass is stalled against a badly placed running bias;
                # recenter it and retry, or give up when that changes nothing
                old_b = self.b
                self._recenter_bias()
                if abs(self.b - old_b) <= 1e-15 * (1.0 + abs(old_b)):
                    return False
            stalled = 0 if objective > previous + 1e-12 * (1.0 + abs(objective)) else stalled + 1
            previous = objective
            if stalled >= self.max_passes:
                break
        return self._kkt_satisfiable()


def _extract_bias(alpha: np.ndarray, y: np.ndarray, K: np.ndarray, c: float) -> float:
    """Mean of y - g over free support vectors, else the midpoint of the
    feasible bias interval implied by the bound variables."""
    g = (alpha * y) @ K
    at_upper = alpha >= c * (1.0 - 1e-8)
    at_zero = alpha <= ALPHA_PRUNE
    free = ~at_zero & ~at_upper
    if free.any():
        return float(np.mean(y[free] - g[free]))
    v = y - g
    lower_set = (at_zero & (y > 0)) | (at_upper & (y < 0))
    upper_set = (at_zero & (y < 0)) | (at_upper & (y > 0))
    lo = float(v[lower_set].max()) if lower_set.any() else -math.inf
    hi = float(v[upper_set].min()) if upper_set.any() else math.inf
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi
    if math.isinf(hi):
        return lo
    return 0.5 * (lo + hi)


def train_binary(
    gram_matrix: GramMatrix,
    labels: np.ndarray,
    config: SvmConfig,
    seed: int,
    features: np.ndarray,
    class_labels: tuple[int, int] = (-1, 1),
    rng_stream: int = STREAM_SMO,
) -> SvmModel:
    """Train one binary machine on a precomputed Gram matrix.

    ``labels`` must be +/-1 with both classes present; ``features`` holds the
    corresponding rows so the model can retain its support vectors.
    """
    y = np.asarray(labels, dtype=float)
    features = np.asarray(features, dtype=float)
    m = gram_matrix.size
    if y.ndim != 1 or len(y) != m or features.ndim != 2 or features.shape[0] != m:
        raise InvalidDimensionError(
            f"gram size {m}, labels {y.shape} and features {features.shape} do not agree"
        )
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidInputError("labels must be +/-1")
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError("training labels contain a single class")
    if gram_matrix.gamma != config.kernel.gamma:
        raise InvalidInputError(
            f"gram gamma {gram_matrix.gamma} != kernel gamma {config.kernel.gamma}"
        )

    optimizer = _PairwiseOptimizer(
        gram_matrix.values, y, config.c, config.tol, config.max_passes,
        SplitMix64(seed, rng_stream),
    )
    converged = optimizer.run()
    alpha = optimizer.alpha
    bias = _extract_bias(alpha, y, gram_matrix.values, config.c)

    keep = alpha > ALPHA_PRUNE
    return SvmModel(
        support_indices=np.flatnonzero(keep),
        alphas=alpha[keep],
        sv_labels=y[keep],
        support_vectors=features[keep],
        bias=bias,
        labels=class_labels,
        kernel=config.kernel,
        converged=converged,
        objective_history=tuple(optimizer.objective_history),
    )


def decision_value(model: SvmModel, x: np.ndarray) -> float:
    """Pre-sign decision value via a per-support-vector kernel loop."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.support_vectors.shape[1]:
        raise InvalidDimensionError(
            f"point of shape {x.shape} does not match feature dimension "
            f"{model.support_vectors.shape[1]}"
        )
    total = 0.0
    for a, y, sv in zip(model.alphas, model.sv_labels, model.support_vectors):
        total += a * y * kernel_vec(sv, x, model.kernel.gamma)
    return total + model.bias


def decision_values(model: SvmModel, points: np.ndarray) -> np.ndarray:
    """Vectorized decision values via a cross Gram matrix; must agree with
    :func:`decision_value` point by point."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != model.support_vectors.shape[1]:
        raise InvalidDimensionError(
            f"points of shape {points.shape} do not match feature dimension "
            f"{model.support_vectors.shape[1]}"
        )
    cross = gram_cross(model.support_vectors, points, model.kernel.gamma)
    return cross @ (model.alphas * model.sv_labels) + model.bias


def predict_binary(model: SvmModel, x: np.ndarray) -> int:
    """Sign of the decision value; exact zero maps to +1."""
    return 1 if decision_value(model, x) >= 0.0 else -1


def train_multiclass(data, config: SvmConfig, seed: int) -> MulticlassModel:
    """One-vs-one training over every class pair present in the data.

    Within each pair the higher class index plays +1.  Machine k trains on
    RNG stream STREAM_SMO + 1 + k so runs are deterministic given the seed.
    """
    labels = np.asarray(data.labels)
    features = np.asarray(data.features, dtype=float)
    classes = sorted(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise DegenerateLabelsError(f"need at least 2 classes, got {classes}")
    machines = []
    for index, (neg, pos) in enumerate(combinations(classes, 2)):
        mask = (labels == neg) | (labels == pos)
        sub_features = features[mask]
        y = np.where(labels[mask] == pos, 1.0, -1.0)
        sub_gram = gram(sub_features, config.kernel.gamma)
        model = train_binary(
            sub_gram, y, config, seed, sub_features,
            class_labels=(neg, pos), rng_stream=STREAM_SMO + 1 + index,
        )
        machines.append(((neg, pos), model))
    return MulticlassModel(machines=tuple(machines), classes=tuple(classes))


def _vote_scores(model: MulticlassModel, points: np.ndarray):
    n = points.shape[0]
    n_classes = len(model.classes)
    index_of = {c: k for k, c in enumerate(model.classes)}
    votes = np.zeros((n, n_classes))
    magnitudes = np.zeros((n, n_classes))
    for (neg, pos), machine in model.machines:
        d = decision_values(machine, points)
        win_pos = d >= 0.0
        votes[:, index_of[pos]] += win_pos
        votes[:, index_of[neg]] += ~win_pos
        magnitudes[:, index_of[pos]] += np.abs(d)
        magnitudes[:, index_of[neg]] += np.abs(d)
    return votes, magnitudes


def predict_multiclass_batch(model: MulticlassModel, points: np.ndarray) -> np.ndarray:
    """Majority vote; ties go to the largest summed |decision value| across
    the machines each tied class participates in, then to the lowest class."""
    points = np.asarray(points, dtype=float)
    votes, magnitudes = _vote_scores(model, points)
    # magnitudes scaled below 1 so they only ever separate vote ties;
    # argmax takes the lowest index on residual exact ties
    score = votes + magnitudes / (1.0 + magnitudes.max())
    winners = np.argmax(score, axis=1)
    return np.array([model.classes[int(w)] for w in winners], dtype=np.int64)


def predict_multiclass(model: MulticlassModel, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidDimensionError(f"expected a 1-d point, got shape {x.shape}")
    return int(predict_multiclass_batch(model, x[None, :])[0])


def predict_labels(model: SvmModel | MulticlassModel, points: np.ndarray) -> np.ndarray:
    """Class labels for a batch of points, for either model kind."""
    points = np.asarray(points, dtype=float)
    if isinstance(model, MulticlassModel):
        return predict_multiclass_batch(model, points)
    d = decision_values(model, points)
    neg, pos = model.labels
    return np.where(d >= 0.0, pos, neg).astype(np.int64)


def accuracy(model: SvmModel | MulticlassModel, data) -> float:
    """Fraction of rows whose predicted label matches."""
    if len(data.labels) == 0:
        raise InvalidInputError("cannot score an empty dataset")
    predicted = predict_labels(model, data.features)
    return float(np.count_nonzero(predicted == np.asarray(data.labels)) / len(data.labels))


def _binary_to_dict(model: SvmModel) -> dict:
    return {
        "support_indices": [int(i) for i in model.support_indices],
        "alphas": [float(a) for a in model.alphas],
        "alpha_y": [float(a * y) for a, y in zip(model.alphas, model.sv_labels)],
        "support_vectors": [[float(v) for v in row] for row in model.support_vectors],
        "bias": model.bias,
        "labels": list(model.labels),
        "converged": model.converged,
    }


def _binary_from_dict(d: dict, kernel_config: KernelConfig) -> SvmModel:
    alpha_y = np.asarray(d["alpha_y"], dtype=float)
    return SvmModel(
        support_indices=np.asarray(d["support_indices"], dtype=np.intp),
        alphas=np.abs(alpha_y),
        sv_labels=np.sign(alpha_y),
        support_vectors=np.asarray(d["support_vectors"], dtype=float),
        bias=float(d["bias"]),
        labels=(int(d["labels"][0]), int(d["labels"][1])),
        kernel=kernel_config,
        converged=bool(d["converged"]),
        objective_history=(),
    )


def model_to_dict(model: SvmModel | MulticlassModel) -> dict:
    """Versioned JSON-compatible form; alphas are stored as alpha*y products."""
    if isinstance(model, SvmModel):
        return {
            "version": MODEL_FORMAT_VERSION,
            "type": "binary",
            "kernel": model.kernel.to_dict(),
            "machine": _binary_to_dict(model),
        }
    return {
        "version": MODEL_FORMAT_VERSION,
        "type": "one_vs_one",
        "kernel": model.machines[0][1].kernel.to_dict(),
        "classes": list(model.classes),
        "machines": [
            {"pair": list(pair), **_binary_to_dict(machine)}
            for pair, machine in model.machines
        ],
    }


def model_from_dict(d: dict) -> SvmModel | MulticlassModel:
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise InvalidInputError(f"unsupported model version: {d.get('version')}")
    kernel_config = KernelConfig.from_dict(d["kernel"])
    if d["type"] == "binary":
        return _binary_from_dict(d["machine"], kernel_config)
    if d["type"] != "one_vs_one":
        raise InvalidInputError(f"unknown model type: {d['type']}")
    machines = tuple(
        ((int(m["pair"][0]), int(m["pair"][1])), _binary_from_dict(m, kernel_config))
        for m in d["machines"]
    )
    return MulticlassModel(machines=machines, classes=tuple(int(c) for c in d["classes"]))


def save_model(path, model: SvmModel | MulticlassModel, extra: dict | None = None) -> None:
    """Atomic JSON write; ``extra`` merges additional top-level fields."""
    payload = model_to_dict(model)
    if extra:
        payload.update(extra)
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> tuple[SvmModel | MulticlassModel, dict]:
    """Read a model file; returns the model and the raw JSON document."""
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    return model_from_dict(payload), payload
