"""Closed-form Gaussian kernel with a squeeze-tunable width, plus Gram matrices.

The squared overlap of two displaced squeezed vacua with displacements
xp, xq and squeezing (r, theta) is exp(-c (xq - xp)^2) with

    c(r, theta) = cosh(2r) + cos(2 theta) sinh(2r),

which reduces to e^{2r} at theta=0 (narrowing), e^{-2r} at theta=pi/2
(widening), and to 1 for r=0 (the coherent-state case).  Products over
coordinates give the multivariate
Gaussian kernel exp(-gamma ||xp - xq||^2) with gamma = c(r, theta).  The
truncated-basis simulator in :mod:`dsvkernel.fock` computes the same number
as a detection probability and serves as the independent reference.

All functions here are pure; Gram construction evaluates each unordered pair
once, so results are deterministic regardless of evaluation order and safe
to compute in parallel.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import InvalidDimensionError, InvalidInputError
from .fock import SqueezeParams

#: Symmetric eigensolver noise floor used by positive-semidefiniteness checks.
PSD_TOLERANCE = -1e-8


def gamma_from_squeeze(eta: SqueezeParams) -> float:
    """Kernel width gamma such that the squared single-mode overlap equals
    exp(-gamma (xq - xp)^2).

    gamma = cosh 2r + cos 2theta sinh 2r; equals 1 exactly when r = 0.
    """
    return math.cosh(2.0 * eta.r) + math.cos(2.0 * eta.theta) * math.sinh(2.0 * eta.r)


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel hyperparameter, either set directly or derived from
    squeezing parameters (kept for provenance)."""

    gamma: float
    squeeze: SqueezeParams | None = None

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise InvalidInputError(f"gamma must be positive and finite, got {self.gamma}")
        if self.squeeze is not None and self.gamma != gamma_from_squeeze(self.squeeze):
            raise InvalidInputError(
                "gamma does not match its squeeze parameters; "
                "use KernelConfig.from_squeeze"
            )

    @classmethod
    def direct(cls, gamma: float) -> "KernelConfig":
        return cls(gamma=float(gamma))

    @classmethod
    def from_squeeze(cls, eta: SqueezeParams) -> "KernelConfig":
        return cls(gamma=gamma_from_squeeze(eta), squeeze=eta)

    def to_dict(self) -> dict:
        d = {"gamma": self.gamma}
        if self.squeeze is not None:
            d["squeeze"] = {"r": self.squeeze.r, "theta": self.squeeze.theta}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelConfig":
        if d.get("squeeze") is not None:
            return cls.from_squeeze(SqueezeParams(d["squeeze"]["r"], d["squeeze"]["theta"]))
        return cls.direct(d["gamma"])


def kernel_scalar(xp: float, xq: float, gamma: float) -> float:
    """exp(-gamma (xq - xp)^2) for scalar inputs."""
    xp, xq = float(xp), float(xq)
    if not (math.isfinite(xp) and math.isfinite(xq)):
        raise InvalidInputError("kernel inputs must be finite")
    if not (math.isfinite(gamma) and gamma > 0.0):
        raise InvalidInputError(f"gamma must be positive and finite, got {gamma}")
    return math.exp(-gamma * (xq - xp) ** 2)


def kernel_vec(xp: np.ndarray, xq: np.ndarray, gamma: float) -> float:
    """exp(-gamma ||xp - xq||^2); the product over coordinates of squared
    single-mode overlaps."""
    xp = np.asarray(xp, dtype=float)
    xq = np.asarray(xq, dtype=float)
    if xp.ndim != 1 or xq.ndim != 1 or xp.shape != xq.shape or len(xp) < 1:
        raise InvalidDimensionError(
            f"inputs must be equal-length 1-d vectors, got {xp.shape} and {xq.shape}"
        )
    if not (np.isfinite(xp).all() and np.isfinite(xq).all()):
        raise InvalidInputError("kernel inputs must be finite")
    if not (math.isfinite(gamma) and gamma > 0.0):
        raise InvalidInputError(f"gamma must be positive and finite, got {gamma}")
    return math.exp(-gamma * float(np.sum((xp - xq) ** 2)))


def data_fingerprint(data: np.ndarray) -> str:
    """sha256 over shape and row-major float64 bytes of a matrix."""
    data = np.ascontiguousarray(data, dtype=float)
    h = hashlib.sha256()
    h.update(f"{data.shape[0]}x{data.shape[1]}:".encode())
    h.update(data.tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class GramMatrix:
    """Pairwise kernel values over one dataset.

    Exactly symmetric (each unordered pair is evaluated once and mirrored)
    with a unit diagonal set by construction.  Off-diagonal entries lie in
    [0, 1]; zero only occurs when exp underflows for very distant pairs.
    """

    values: np.ndarray
    gamma: float
    data_fingerprint: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidDimensionError(f"Gram matrix must be square, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise InvalidInputError("Gram matrix must be exactly symmetric")
        if not np.all(np.diag(v) == 1.0):
            raise InvalidInputError("Gram diagonal must be exactly 1")
        if v.min() < 0.0 or v.max() > 1.0:
            raise InvalidInputError("Gram entries must lie in [0, 1]")
        arr = np.array(v)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.values)[0])

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"# gamma={self.gamma!r}\n")
            f.write(f"# fingerprint={self.data_fingerprint}\n")
            for row in self.values:
                f.write(",".join(repr(float(v)) for v in row) + "\n")


def _validate_matrix(data: np.ndarray, name: str) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 1:
        raise InvalidDimensionError(f"{name} must be a 2-d matrix with rows, got {data.shape}")
    if not np.isfinite(data).all():
        raise InvalidInputError(f"{name} contains non-finite entries")
    return data


def gram(data: np.ndarray, gamma: float) -> GramMatrix:
    """Gram matrix of kernel_vec over all row pairs of an M x N matrix."""
    data = _validate_matrix(data, "data")
    if not (math.isfinite(gamma) and gamma > 0.0):
        raise InvalidInputError(f"gamma must be positive and finite, got {gamma}")
    m = data.shape[0]
    if m == 1:
        values = np.ones((1, 1))
    else:
        condensed = np.exp(-gamma * pdist(data, "sqeuclidean"))
        values = squareform(condensed)
        np.fill_diagonal(values, 1.0)
    return GramMatrix(values=values, gamma=float(gamma), data_fingerprint=data_fingerprint(data))


def gram_cross(train: np.ndarray, test: np.ndarray, gamma: float) -> np.ndarray:
    """Rectangular kernel matrix; rows are test points, columns train points."""
    train = _validate_matrix(train, "train")
    test = _validate_matrix(test, "test")
    if train.shape[1] != test.shape[1]:
        raise InvalidDimensionError(
            f"feature dimensions differ: train {train.shape[1]}, test {test.shape[1]}"
        )
    if not (math.isfinite(gamma) and gamma > 0.0):
        raise InvalidInputError(f"gamma must be positive and finite, got {gamma}")
    return np.exp(-gamma * cdist(test, train, "sqeuclidean"))
