"""Single-mode bosonic operators in a truncated photon-number basis.

The basis is |0>, ..., |N-1> for a cutoff N.  Displacement and squeezing are
built by exponentiating truncated generators, which keeps them exactly
unitary as N x N matrices; accuracy relative to the untruncated operators is
controlled by rejecting parameters whose states would carry significant
amplitude past the cutoff.  The zero-photon detection probability of

    S'(eta) D'(xp) D(xq) S(eta) |0>        (' = conjugate transpose)

computed here is the brute-force reference against which the closed-form
Gaussian kernel in :mod:`dsvkernel.kernel` is validated.

Operator conventions
--------------------
* annihilation  a|n> = sqrt(n)|n-1>;  creation a' is its conjugate
  transpose; the truncated commutator [a, a'] equals I except the last
  diagonal entry, which is -(N-1).
* displacement  D(x) = exp(x a' - x* a).
* squeezing     S(r, theta) = exp( r (e^{-2i theta} a^2 - e^{2i theta} a'^2) / 2 ).

The doubled phase in S makes the conjugation rule

    S'(r, theta) D(x) S(r, theta) = D(x cosh r + x* e^{2i theta} sinh r)

hold exactly, which is the identity the Gaussian-kernel construction rests
on.  It also gives S a period of pi in theta and makes a negative squeezing
magnitude equivalent to theta -> theta + pi/2, matching the normalization
performed by :class:`SqueezeParams`.

All operations are pure functions on immutable values; results are safe to
share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CutoffExceededError, InvalidDimensionError, InvalidInputError

#: Default basis size; displaced squeezed states with r <= 0.8 and |x| <= 1
#: carry < 1e-12 of their mass above |63>, and 64x64 exponentials are cheap.
DEFAULT_CUTOFF = 64

#: Single tolerance used wherever a state norm is asserted.
EPS_NORM = 1e-9

#: Squeezing is rejected when the squeezed vacuum would lose more than this
#: much probability mass to truncation.
TAIL_MASS_LIMIT = 1e-9


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SqueezeParams:
    """Squeezing magnitude ``r`` and phase ``theta`` (radians).

    Normalized at construction: a negative ``r`` is folded into the phase via
    theta -> theta + pi/2, and theta is reduced modulo pi.  Both maps leave
    the squeezing operator unchanged.
    """

    r: float
    theta: float = 0.0

    def __post_init__(self):
        r = float(self.r)
        theta = float(self.theta)
        if not (math.isfinite(r) and math.isfinite(theta)):
            raise InvalidInputError("squeeze parameters must be finite")
        if r < 0.0:
            r = -r
            theta += math.pi / 2.0
        theta = theta % math.pi
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class TruncatedState:
    """Complex amplitude vector over |0> ... |cutoff-1>.

    Truncation may only lose probability mass, never create it, so the
    squared norm must not exceed 1 + EPS_NORM.
    """

    amplitudes: np.ndarray
    cutoff: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or len(amps) != self.cutoff:
            raise InvalidDimensionError(
                f"amplitude vector of length {amps.shape} does not match cutoff {self.cutoff}"
            )
        sq_norm = float(np.vdot(amps, amps).real)
        if sq_norm > 1.0 + EPS_NORM:
            raise InvalidInputError(
                f"squared norm {sq_norm} exceeds 1 + {EPS_NORM}; states cannot gain mass"
            )
        object.__setattr__(self, "amplitudes", _readonly(amps))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class BosonicOperator:
    """Dense complex matrix acting on the truncated basis, with a tag."""

    matrix: np.ndarray
    cutoff: int
    label: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != self.cutoff:
            raise InvalidDimensionError(
                f"operator matrix of shape {m.shape} does not match cutoff {self.cutoff}"
            )
        object.__setattr__(self, "matrix", _readonly(m))

    def dagger(self) -> "BosonicOperator":
        return BosonicOperator(self.matrix.conj().T, self.cutoff, self.label + "_dagger")

    def apply(self, state: TruncatedState) -> TruncatedState:
        if state.cutoff != self.cutoff:
            raise InvalidDimensionError(
                f"operator cutoff {self.cutoff} != state cutoff {state.cutoff}"
            )
        return TruncatedState(self.matrix @ state.amplitudes, self.cutoff)


def ladder_ops(cutoff: int) -> tuple[BosonicOperator, BosonicOperator]:
    """Annihilation and creation operators (a, a_dagger) at the given cutoff."""
    if cutoff < 2:
        raise InvalidDimensionError(f"cutoff must be >= 2, got {cutoff}")
    a = np.zeros((cutoff, cutoff), dtype=complex)
    for n in range(1, cutoff):
        a[n - 1, n] = math.sqrt(n)
    return (
        BosonicOperator(a, cutoff, "ladder"),
        BosonicOperator(a.conj().T, cutoff, "ladder_dagger"),
    )


def matrix_exp(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """exp(m) by scaling-and-squaring with a Taylor core.

    The matrix is scaled by 2**-s until its 1-norm is at most 1/2, the series
    is summed until the remainder bound drops below tol (tightened by 2**-s
    to absorb error growth in the squaring phase), then squared s times.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidDimensionError(f"matrix_exp needs a square matrix, got shape {m.shape}")
    if not (tol > 0.0):
        raise InvalidInputError("tol must be positive")
    n = m.shape[0]
    norm = float(np.linalg.norm(m, 1))
    if norm == 0.0 or not math.isfinite(norm):
        if not math.isfinite(norm):
            raise InvalidInputError("matrix_exp input contains non-finite entries")
        return np.eye(n, dtype=complex)

    s = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    a = m / (2.0 ** s)
    scaled_norm = norm / (2.0 ** s)
    tol_scaled = tol / (2.0 ** s)

    result = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    term_bound = 1.0  # scalar bound on ||a^k / k!||_1
    k = 0
    while True:
        k += 1
        term = term @ a / k
        result = result + term
        term_bound *= scaled_norm / k
        # geometric tail bound: sum_{j>k} ||a||^j/j! <= term_bound * q/(1-q)
        q = scaled_norm / (k + 1)
        if term_bound * q / (1.0 - q) <= tol_scaled or k > 80:
            break

    for _ in range(s):
        result = result @ result
    return result


def displacement(x: complex, cutoff: int = DEFAULT_CUTOFF) -> BosonicOperator:
    """Displacement operator D(x) = exp(x a_dagger - x* a).

    Rejects |x|^2 > cutoff/4: the displaced vacuum would have non-negligible
    photon-number support near the basis edge and the truncated matrix would
    silently stop approximating the true operator.
    """
    x = complex(x)
    if not (math.isfinite(x.real) and math.isfinite(x.imag)):
        raise InvalidInputError("displacement amplitude must be finite")
    if abs(x) ** 2 > cutoff / 4.0:
        needed = math.ceil(4.0 * abs(x) ** 2)
        raise CutoffExceededError(
            f"|x|^2 = {abs(x) ** 2:.4g} exceeds cutoff/4 = {cutoff / 4:.4g}; "
            f"use a cutoff of at least {needed}"
        )
    a, adag = ladder_ops(cutoff)
    gen = x * adag.matrix - x.conjugate() * a.matrix
    return BosonicOperator(matrix_exp(gen), cutoff, "displacement")


def squeezed_vacuum_tail_mass(r: float, cutoff: int) -> float:
    """Probability mass of the squeezed vacuum at photon numbers >= cutoff.

    The exact number distribution is p_{2n} = (2n)!/(4^n n!^2) tanh(r)^{2n}
    / cosh(r) on even states and zero on odd ones; the partial sum is
    accumulated with the stable ratio recurrence.
    """
    if r == 0.0:
        return 0.0
    t2 = math.tanh(r) ** 2
    p = 1.0 / math.cosh(r)
    total = 0.0
    n = 0
    while 2 * n < cutoff:
        total += p
        p *= t2 * (2 * n + 1) / (2 * n + 2)
        n += 1
    return max(0.0, 1.0 - total)


def _min_squeeze_cutoff(r: float) -> int:
    n = DEFAULT_CUTOFF
    while squeezed_vacuum_tail_mass(r, n) > TAIL_MASS_LIMIT and n < 1 << 16:
        n *= 2
    return n


def squeeze(eta: SqueezeParams, cutoff: int = DEFAULT_CUTOFF) -> BosonicOperator:
    """Squeezing operator S(r, theta) = exp(r (e^{-2i theta} a^2 - e^{2i theta} a_dagger^2) / 2).

    Rejects magnitudes whose squeezed vacuum would lose more than
    TAIL_MASS_LIMIT of its mass to truncation at this cutoff.
    """
    tail = squeezed_vacuum_tail_mass(eta.r, cutoff)
    if tail > TAIL_MASS_LIMIT:
        raise CutoffExceededError(
            f"squeezing r = {eta.r:.4g} leaves {tail:.3g} probability mass above the "
            f"cutoff {cutoff}; use a cutoff of at least {_min_squeeze_cutoff(eta.r)}"
        )
    a, adag = ladder_ops(cutoff)
    phase = complex(math.cos(2.0 * eta.theta), math.sin(2.0 * eta.theta))
    gen = 0.5 * eta.r * (
        phase.conjugate() * (a.matrix @ a.matrix) - phase * (adag.matrix @ adag.matrix)
    )
    return BosonicOperator(matrix_exp(gen), cutoff, "squeeze")


def vacuum(cutoff: int = DEFAULT_CUTOFF) -> TruncatedState:
    amps = np.zeros(cutoff, dtype=complex)
    amps[0] = 1.0
    return TruncatedState(amps, cutoff)


def dsv_state(
    x: complex, eta: SqueezeParams, cutoff: int = DEFAULT_CUTOFF
) -> TruncatedState:
    """Displaced squeezed vacuum D(x) S(eta) |0>, normalized within EPS_NORM."""
    state = displacement(x, cutoff).apply(squeeze(eta, cutoff).apply(vacuum(cutoff)))
    if abs(state.norm() - 1.0) > EPS_NORM:
        raise CutoffExceededError(
            f"state norm {state.norm()} deviates from 1 beyond {EPS_NORM}; "
            "increase the cutoff"
        )
    return state


def overlap(a: TruncatedState, b: TruncatedState) -> complex:
    """Inner product <a|b>, conjugate-linear in the first argument."""
    if a.cutoff != b.cutoff:
        raise InvalidDimensionError(f"cutoff mismatch: {a.cutoff} != {b.cutoff}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def circuit_kernel(
    xp: float, xq: float, eta: SqueezeParams, cutoff: int = DEFAULT_CUTOFF
) -> float:
    """Zero-photon detection probability of S^dag D^dag(xp) D(xq) S |0>.

    Equals |<xp;eta|xq;eta>|^2, the squared overlap of the two displaced
    squeezed vacua, and lies in [0, 1].
    """
    xp = float(xp)
    xq = float(xq)
    if not (math.isfinite(xp) and math.isfinite(xq)):
        raise InvalidInputError("kernel inputs must be finite")
    s = squeeze(eta, cutoff)
    dp = displacement(xp, cutoff)
    dq = displacement(xq, cutoff)
    psi = vacuum(cutoff).amplitudes
    psi = s.matrix @ psi
    psi = dq.matrix @ psi
    psi = dp.matrix.conj().T @ psi
    psi = s.matrix.conj().T @ psi
    prob = float(abs(psi[0]) ** 2)
    return min(1.0, max(0.0, prob))
