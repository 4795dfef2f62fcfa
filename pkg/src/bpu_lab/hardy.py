"""Level-k equivariant function spaces on the unit 3-sphere.

Sections of the k-th power of the model line bundle are realized as
restrictions of degree-k holomorphic monomials z0^a z1^(k-a); they transform
with weight +k under the circle action (``EQUIVARIANCE_SIGN``).  The basis
is orthogonal for the bundle measure, with closed-form squared norms

    ||s_a||^2 = BUNDLE_VOLUME * a! (k-a)! / (k+1)!

stored in the log domain.  BUNDLE_VOLUME = sqrt(pi) is the single global
measure scale of the model; it is the unique choice for which the latitude
norm sweeps of the projection module reach the leading constant
sqrt(2/pi) * r^2 (see the bpu module and the acceptance suite).  Inner
products are conjugate-linear in the first slot.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ContractViolation, DomainError
from .geometry import as_point_array

__all__ = [
    "BUNDLE_VOLUME",
    "EQUIVARIANCE_SIGN",
    "SectionBasis",
    "SectionVector",
    "basis",
    "monomial_values",
    "monomial_derivatives",
    "eval_section",
    "directional_derivative",
    "fiber_derivative",
    "inner",
    "norm_sq",
]

BUNDLE_VOLUME = math.sqrt(math.pi)
EQUIVARIANCE_SIGN = +1  # eval(e^{i theta} x) = e^{+i k theta} eval(x)


@dataclass(frozen=True)
class SectionBasis:
    """Orthogonal monomial basis of the level-k space (dimension k+1)."""

    k: int
    exponents: NDArray[np.int64]
    log_norms: NDArray[np.float64]  # log ||s_a||^2

    @property
    def dim(self) -> int:
        return self.k + 1

    @property
    def norms_sq(self) -> NDArray[np.float64]:
        return np.exp(self.log_norms)


@dataclass(frozen=True)
class SectionVector:
    """Coefficient vector in the orthogonal monomial basis."""

    k: int
    coefficients: NDArray[np.complex128]

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=np.complex128)
        if coeffs.shape != (self.k + 1,):
            raise DomainError(f"level-{self.k} vector needs {self.k + 1} coefficients")
        object.__setattr__(self, "coefficients", coeffs)

    def to_json(self) -> str:
        return json.dumps(
            {"k": self.k, "coefficients": [[c.real, c.imag] for c in self.coefficients]},
            sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SectionVector":
        payload = json.loads(text)
        pairs = np.asarray(payload["coefficients"], dtype=np.float64)
        return cls(int(payload["k"]), pairs[:, 0] + 1j * pairs[:, 1])


def basis(k: int) -> SectionBasis:
    """Monomial basis with log-domain norms (stable for k up to thousands).

    Norms are accumulated through the adjacent-ratio recurrence
    ||s_{a+1}||^2 / ||s_a||^2 = (a+1)/(k-a) from the closed-form anchor at
    a = 0, which keeps neighboring log-differences exact to rounding.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise DomainError(f"level must be a positive integer, got {k!r}")
    a = np.arange(k + 1, dtype=np.int64)
    steps = np.log(np.arange(1, k + 1, dtype=np.float64) / np.arange(k, 0, -1, dtype=np.float64))
    log_norms = np.empty(k + 1)
    log_norms[0] = math.log(BUNDLE_VOLUME) - math.log(k + 1.0)
    np.cumsum(steps, out=log_norms[1:])
    log_norms[1:] += log_norms[0]
    return SectionBasis(k=int(k), exponents=a, log_norms=log_norms)


def monomial_values(b: SectionBasis, points: np.ndarray) -> NDArray[np.complex128]:
    """Matrix of monomial values z0^a z1^(k-a) at bundle points, shape (M, k+1)."""
    pts = np.atleast_2d(as_point_array(points))
    a = b.exponents
    return pts[:, [0]] ** a[None, :] * pts[:, [1]] ** (b.k - a)[None, :]


def monomial_derivatives(b: SectionBasis, points: np.ndarray,
                         vectors: np.ndarray) -> NDArray[np.complex128]:
    """Directional derivatives of each monomial along per-point C^2 vectors.

    The monomials extend holomorphically, so the derivative along a real
    tangent vector w is the complex-linear pairing dP(w) = w0 dP/dz0 + w1 dP/dz1,
    evaluated exactly.
    """
    pts = np.atleast_2d(as_point_array(points))
    w = np.atleast_2d(np.asarray(vectors, dtype=np.complex128))
    a = b.exponents
    z0, z1 = pts[:, [0]], pts[:, [1]]
    # a * z0^(a-1) * z1^(k-a): guard 0^(-1) via explicit zero at a = 0.
    d0 = np.where(a[None, :] > 0, a[None, :] * z0 ** np.maximum(a - 1, 0)[None, :]
                  * z1 ** (b.k - a)[None, :], 0.0)
    d1 = np.where((b.k - a)[None, :] > 0, (b.k - a)[None, :] * z0 ** a[None, :]
                  * z1 ** np.maximum(b.k - a - 1, 0)[None, :], 0.0)
    return w[:, [0]] * d0 + w[:, [1]] * d1


def eval_section(b: SectionBasis, v: SectionVector, x) -> complex | NDArray[np.complex128]:
    """Value of the equivariant function of v at bundle point(s) x."""
    if v.k != b.k:
        raise ContractViolation(f"level mismatch: basis {b.k}, vector {v.k}")
    vals = monomial_values(b, x) @ v.coefficients
    if np.ndim(as_point_array(x)) == 1:
        return complex(vals[0])
    return vals


def directional_derivative(b: SectionBasis, v: SectionVector, x, w) -> complex | NDArray[np.complex128]:
    """Exact derivative of the equivariant function along sphere-tangent w."""
    if v.k != b.k:
        raise ContractViolation(f"level mismatch: basis {b.k}, vector {v.k}")
    pts = np.atleast_2d(as_point_array(x))
    wv = np.atleast_2d(np.asarray(w, dtype=np.complex128))
    radial = np.real(np.sum(np.conj(pts) * wv, axis=-1))
    if np.max(np.abs(radial)) > 1e-10:
        raise ContractViolation("direction is not tangent to the 3-sphere")
    vals = monomial_derivatives(b, pts, wv) @ v.coefficients
    if np.ndim(as_point_array(x)) == 1:
        return complex(vals[0])
    return vals


def fiber_derivative(b: SectionBasis, v: SectionVector, x) -> complex | NDArray[np.complex128]:
    """Derivative along the circle-action generator: i*k times the value."""
    return 1j * b.k * EQUIVARIANCE_SIGN * eval_section(b, v, x)


def inner(b: SectionBasis, u: SectionVector | np.ndarray, v: SectionVector | np.ndarray) -> complex:
    """L2 pairing from coefficients, conjugate-linear in the first slot."""
    cu = u.coefficients if isinstance(u, SectionVector) else np.asarray(u)
    cv = v.coefficients if isinstance(v, SectionVector) else np.asarray(v)
    return complex(np.sum(np.conj(cu) * cv * b.norms_sq))


def norm_sq(b: SectionBasis, v: SectionVector | np.ndarray) -> float:
    cv = v.coefficients if isinstance(v, SectionVector) else np.asarray(v)
    return float(np.sum(np.abs(cv) ** 2 * b.norms_sq))
