"""Level-k projections of half-weighted loop distributions and their
derivatives, orthogonalization, and projective-space pullbacks.

A half-weighted closed lift (P, lambda) defines the distributional pairing

    <delta_(P,lambda), gamma> = integral over P of S_lambda * gamma * dens_P,

whose projection onto the level-k space has coefficients
c_a = <delta, conj(s_a)> / ||s_a||^2.  The projection vanishes identically
unless the winding number r divides k.

Two derivative routes are implemented and cross-checked: the analytic
pairing (function/half-density/transport/fiber terms, with two convention
signs calibrated once against ground truth) and the geometric
finite-difference oracle built on the contact transport of `leaf.flow_state`.
Pullback values are Gram ratios of the orthogonalized derivatives and are
independent of the global bundle measure scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from . import asymptotics, hardy
from .errors import ContractViolation, OutsideAdmissibleSetError
from .fourier import TWO_PI
from .geometry import (
    PlanckianLift,
    SQRT_PI,
    as_point_array,
    foot_parameters,
    fs_distance,
    normal_frame,
)
from .hardy import SectionBasis, SectionVector, basis as hardy_basis, monomial_derivatives, monomial_values
from .leaf import HalfWeight, LeafTangent, flow_state, gamma_flow, hamiltonian_normal_components

__all__ = [
    "TRANSVERSE_SCALE",
    "SPHERE_DIAMETER",
    "COEFF_FLOOR",
    "BpuState",
    "PullbackResult",
    "ProfileTable",
    "delta_pair",
    "bpu_map",
    "d_delta_pair",
    "d_bpu",
    "fd_d_bpu",
    "zk_orthogonalize",
    "fs_pullback",
    "pullback_sweep",
    "f_integrand",
    "norm_sweep",
    "pointwise_profile",
    "decay_check",
]

# Heisenberg transverse unit: the norm in which the leading transverse
# profile is the standard Gaussian exp(-|w|^2).  On this model it is
# sqrt(pi) times the area-1 FS norm (the C^2-horizontal norm).
TRANSVERSE_SCALE = SQRT_PI

# Maximal base distance in the area-1 metric (pole to pole).
SPHERE_DIAMETER = SQRT_PI / 2.0

# Coefficients below this magnitude count as exactly zero (quadrature floor).
COEFF_FLOOR = 1e-11


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BpuState:
    """Level-k projection of the delta distribution of (P, lambda)."""

    k: int
    sec_basis: SectionBasis
    coefficients: NDArray[np.complex128]
    lift: PlanckianLift
    halfweight: HalfWeight

    @property
    def r(self) -> int:
        return self.lift.winding

    @property
    def vector(self) -> SectionVector:
        return SectionVector(self.k, self.coefficients)

    @property
    def norm_sq(self) -> float:
        return hardy.norm_sq(self.sec_basis, self.coefficients)

    @property
    def is_admissible(self) -> bool:
        """Membership in the open set where the projectivized map is defined."""
        return bool(np.max(np.abs(self.coefficients)) > COEFF_FLOOR)

    def evaluate(self, points) -> NDArray[np.complex128]:
        return monomial_values(self.sec_basis, points) @ self.coefficients


@dataclass(frozen=True)
class PullbackResult:
    """Hermitian pullback datum at level k; raw = g_value + i * omega_value."""

    k: int
    omega_value: float
    g_value: float
    hermitian: complex
    u_norm_sq: float


@dataclass(frozen=True)
class ProfileTable:
    """Transverse profile |u(x + w/sqrt(k))| / |u(x)| against the Gaussian."""

    w_norm: NDArray[np.float64]
    w_perp_norm: NDArray[np.float64]
    ratio: NDArray[np.float64]
    gaussian: NDArray[np.float64]

    def max_abs_deviation(self) -> float:
        return float(np.max(np.abs(self.ratio - self.gaussian)))


# ---------------------------------------------------------------------------
# Pairings and projection
# ---------------------------------------------------------------------------

def _lift_weights(lift: PlanckianLift, hw: HalfWeight) -> NDArray[np.float64]:
    """Quadrature weights S_lambda * speed * (2 pi / N) at the lift nodes."""
    if hw.loop is not lift.base:
        raise ContractViolation("half-weight and lift live on different loops")
    s = np.tile(hw.s_lambda, lift.winding)
    return s * lift.speed * (TWO_PI / lift.base.n)


def delta_pair(lift: PlanckianLift, hw: HalfWeight, section_values) -> complex:
    """Pairing of the half-weighted delta of the lift with a test section.

    `section_values` maps bundle points (M, 2) to complex values; the
    pairing is the periodic-trapezoid quadrature of S_lambda * values over
    the r-fold cover with its length density.
    """
    vals = np.asarray(section_values(lift.points))
    return complex(np.sum(_lift_weights(lift, hw) * vals))


def bpu_map(lift: PlanckianLift, hw: HalfWeight, k: int,
            sec_basis: SectionBasis | None = None) -> BpuState:
    """Orthogonal projection of the half-weighted delta onto level k.

    Pairings below the quadrature floor (relative to their no-cancellation
    bound) are exact zeros of the rotational selection rule: they are
    snapped to zero before dividing by the basis norms, which keeps the
    off-lattice vanishing exact.  The floor sits two orders above the lift
    seam noise; a pairing that small contributes less than 1e-19 to any
    norm or Gram quantity, while the mid-band basis norms are tiny enough
    that leaving such noise in place would masquerade as O(1e-3)
    coefficients.
    """
    b = sec_basis if sec_basis is not None else hardy_basis(k)
    if b.k != k:
        raise ContractViolation("basis level does not match k")
    weights = _lift_weights(lift, hw)
    mono = monomial_values(b, lift.points)
    pairings = np.conj(mono).T @ weights
    bound = np.abs(mono).T @ np.abs(weights)
    pairings[np.abs(pairings) <= 1e-10 * bound] = 0.0
    coeffs = pairings / b.norms_sq
    return BpuState(k=k, sec_basis=b, coefficients=coeffs, lift=lift, halfweight=hw)


# ---------------------------------------------------------------------------
# Analytic derivative
# ---------------------------------------------------------------------------

def _default_signs() -> tuple[int, int]:
    from .calibration import calibrated_signs
    cal = calibrated_signs()
    return cal.sigma_theta, cal.sigma_p


def _upsilon_at_lift(lift: PlanckianLift, w: LeafTangent) -> NDArray[np.complex128]:
    """Horizontal lift, at each lift node, of the Hamiltonian field of f."""
    loop = lift.base
    a = hamiltonian_normal_components(loop, w.f)
    ups_base = a[:, None] * normal_frame(loop)
    return lift.phases[:, None] * np.tile(ups_base, (lift.winding, 1))


def d_delta_pair(lift: PlanckianLift, hw: HalfWeight, w: LeafTangent, section,
                 gamma: np.ndarray | None = None,
                 signs: tuple[int, int] | None = None) -> complex:
    """Derivative of the delta pairing along the tangent (f, ell).

    `section` provides .value(points), .fiber_derivative(points) (the
    derivative along the circle generator) and .directional_derivative
    (points, vectors).  The four amplitude terms are the half-density
    velocity S_ell, the transport term S_lambda * Gamma(L, f), the fiber
    term sigma_theta * f * S_lambda * d_theta, and the normal term
    sigma_p * S_lambda * d_upsilon; the two signs are global conventions
    fixed once against the finite-difference oracle.
    """
    if signs is None:
        signs = _default_signs()
    sigma_theta, sigma_p = signs
    loop = lift.base
    if gamma is None:
        gamma = gamma_flow(loop, w.f)
    weights = lift.speed * (TWO_PI / loop.n)
    r = lift.winding

    amp_density = np.tile(w.s_ell + hw.s_lambda * gamma, r)
    s_lam = np.tile(hw.s_lambda, r)
    f_vals = np.tile(w.f, r)

    vals = np.asarray(section.value(lift.points))
    fib = np.asarray(section.fiber_derivative(lift.points))
    direc = np.asarray(section.directional_derivative(lift.points, _upsilon_at_lift(lift, w)))

    integrand = (amp_density * vals
                 + sigma_theta * f_vals * s_lam * fib
                 + sigma_p * s_lam * direc)
    return complex(np.sum(weights * integrand))


class _ConjugateMonomial:
    """Test functional conj(s_a) with its exact derivatives."""

    def __init__(self, sec_basis: SectionBasis, index: int):
        self.b = sec_basis
        self.a = index

    def value(self, points):
        return np.conj(monomial_values(self.b, points)[:, self.a])

    def fiber_derivative(self, points):
        return np.conj(1j * self.b.k * monomial_values(self.b, points)[:, self.a])

    def directional_derivative(self, points, vectors):
        return np.conj(monomial_derivatives(self.b, points, vectors)[:, self.a])


def conjugate_monomial(sec_basis: SectionBasis, index: int) -> _ConjugateMonomial:
    return _ConjugateMonomial(sec_basis, index)


def d_bpu(lift: PlanckianLift, hw: HalfWeight, w: LeafTangent, k: int,
          rescale: bool = True,
          sec_basis: SectionBasis | None = None,
          gamma: np.ndarray | None = None,
          signs: tuple[int, int] | None = None) -> SectionVector:
    """Coefficients of the projected derivative along (f, ell) at level k.

    With `rescale` the half-density leg is amplified to (f, k*ell) by
    linearity, the scaling under which the pullback expansions carry their
    k^2 leading term.  Returns the zero vector with a warning when the
    winding does not divide k.
    """
    b = sec_basis if sec_basis is not None else hardy_basis(k)
    if k % lift.winding:
        warnings.warn(f"level {k} is not divisible by the winding {lift.winding}; "
                      "the projection is identically zero", stacklevel=2)
        return SectionVector(k, np.zeros(k + 1, dtype=np.complex128))
    if signs is None:
        signs = _default_signs()
    sigma_theta, sigma_p = signs
    loop = lift.base
    if gamma is None:
        gamma = gamma_flow(loop, w.f)
    r = lift.winding
    weights = lift.speed * (TWO_PI / loop.n)
    s_lam = np.tile(hw.s_lambda, r)
    f_vals = np.tile(w.f, r)

    mono = monomial_values(b, lift.points)            # (rN, k+1)
    mono_c = np.conj(mono)
    fiber_c = np.conj(1j * k * mono)                  # conj of the fiber derivative
    direc_c = np.conj(monomial_derivatives(b, lift.points, _upsilon_at_lift(lift, w)))

    # f-leg: transport + fiber + normal terms; ell-leg: half-density velocity.
    amp_f = np.tile(hw.s_lambda * gamma, r) * weights
    amp_ell = np.tile(w.s_ell, r) * weights
    pair_f = (mono_c.T @ amp_f
              + sigma_theta * (fiber_c.T @ (f_vals * s_lam * weights))
              + sigma_p * (direc_c.T @ (s_lam * weights)))
    pair_ell = mono_c.T @ amp_ell
    scale_ell = float(k) if rescale else 1.0
    return SectionVector(k, (pair_f + scale_ell * pair_ell) / b.norms_sq)


def fd_d_bpu(lift: PlanckianLift, hw: HalfWeight, w: LeafTangent, k: int,
             rescale: bool = True, step: float = 1e-3,
             sec_basis: SectionBasis | None = None) -> SectionVector:
    """Finite-difference ground truth for d_bpu via the contact transport.

    Central differences of the projection along the flow at steps t and
    t/2, Richardson-combined.  The rescaled variant uses linearity in the
    half-density leg.
    """
    b = sec_basis if sec_basis is not None else hardy_basis(k)

    def central_for(tangent: LeafTangent, h: float) -> np.ndarray:
        plus = bpu_map(*flow_state(lift, hw, tangent, +h), k, b).coefficients
        minus = bpu_map(*flow_state(lift, hw, tangent, -h), k, b).coefficients
        return (plus - minus) / (2.0 * h)

    def derivative_for(tangent: LeafTangent) -> np.ndarray:
        d1 = central_for(tangent, step)
        d2 = central_for(tangent, 0.5 * step)
        return (4.0 * d2 - d1) / 3.0

    if not rescale:
        return SectionVector(k, derivative_for(w))
    loop = lift.base
    zero = np.zeros(loop.n)
    d_f = derivative_for(LeafTangent(loop, w.f, zero))
    d_ell = derivative_for(LeafTangent(loop, zero, w.s_ell))
    return SectionVector(k, d_f + float(k) * d_ell)


# ---------------------------------------------------------------------------
# Orthogonalization and pullbacks
# ---------------------------------------------------------------------------

def zk_orthogonalize(u: BpuState, du: SectionVector) -> SectionVector:
    """Component of du orthogonal to u (Gram-Schmidt step)."""
    if not u.is_admissible:
        raise OutsideAdmissibleSetError(
            "projection vanishes at this level; orthogonalization undefined")
    b = u.sec_basis
    coeff = hardy.inner(b, u.coefficients, du.coefficients) / u.norm_sq
    return SectionVector(u.k, du.coefficients - coeff * u.coefficients)


def f_integrand(w: LeafTangent, wp: LeafTangent, hw: HalfWeight) -> complex:
    """Integral over L of the Hermitian pairing density

        F = (S_ell S_ell' + f f' S_lambda^2) + i (S_ell f' - f S_ell') S_lambda.
    """
    if w.loop is not wp.loop:
        raise ContractViolation("tangents live on different loops")
    s = hw.s_lambda
    real_part = w.s_ell * wp.s_ell + w.f * wp.f * s ** 2
    imag_part = (w.s_ell * wp.f - w.f * wp.s_ell) * s
    dens = hw.loop.speed * (TWO_PI / hw.loop.n)
    return complex(np.sum((real_part + 1j * imag_part) * dens))


def fs_pullback(lift: PlanckianLift, hw: HalfWeight, w: LeafTangent, wp: LeafTangent,
                k: int,
                sec_basis: SectionBasis | None = None,
                gammas: tuple[np.ndarray, np.ndarray] | None = None,
                signs: tuple[int, int] | None = None) -> PullbackResult:
    """Level-k pullback pairing of two leaf tangents.

    Builds u, the rescaled derivatives, their orthogonal parts Z, Z', and
    returns raw = <Z, Z'> / <u, u> split into metric (real) and symplectic
    (imaginary) values.  Independent of the bundle measure scale and of the
    lift's starting phase.
    """
    b = sec_basis if sec_basis is not None else hardy_basis(k)
    u = bpu_map(lift, hw, k, b)
    if not u.is_admissible:
        raise OutsideAdmissibleSetError(f"(L, lambda) lies outside the level-{k} domain")
    g_w = gammas[0] if gammas is not None else None
    g_wp = gammas[1] if gammas is not None else None
    du = d_bpu(lift, hw, w, k, rescale=True, sec_basis=b, gamma=g_w, signs=signs)
    z = zk_orthogonalize(u, du)
    diagonal = wp is w or (np.array_equal(w.f, wp.f) and np.array_equal(w.s_ell, wp.s_ell))
    if diagonal:
        # Im of a quadratic form is identically zero; compute it as a norm so
        # the identity holds exactly rather than to complex-multiply rounding.
        raw = complex(hardy.norm_sq(b, z.coefficients) / u.norm_sq)
    else:
        dup = d_bpu(lift, hw, wp, k, rescale=True, sec_basis=b, gamma=g_wp, signs=signs)
        zp = zk_orthogonalize(u, dup)
        raw = hardy.inner(b, z.coefficients, zp.coefficients) / u.norm_sq
    return PullbackResult(k=k, omega_value=float(raw.imag), g_value=float(raw.real),
                          hermitian=complex(raw), u_norm_sq=u.norm_sq)


def pullback_sweep(lift: PlanckianLift, hw: HalfWeight, w: LeafTangent, wp: LeafTangent,
                   ks: Sequence[int],
                   signs: tuple[int, int] | None = None) -> list[PullbackResult]:
    """fs_pullback over a level sweep, computing each transport term once."""
    gammas = (gamma_flow(lift.base, w.f), gamma_flow(lift.base, wp.f))
    return [fs_pullback(lift, hw, w, wp, k, gammas=gammas, signs=signs) for k in ks]


def norm_sweep(lift: PlanckianLift, hw: HalfWeight, ks: Sequence[int]) -> list[dict]:
    """Table of squared norms over levels, with admissibility records."""
    rows = []
    for k in ks:
        state = bpu_map(lift, hw, k)
        rows.append({
            "k": int(k),
            "l": int(k // lift.winding) if k % lift.winding == 0 else 0,
            "r": lift.winding,
            "norm_sq": state.norm_sq,
            "admissible": state.is_admissible,
        })
    return rows


# ---------------------------------------------------------------------------
# Pointwise structure
# ---------------------------------------------------------------------------

def pointwise_profile(state: BpuState, x, w_direction,
                      samples: np.ndarray | None = None) -> ProfileTable:
    """Modulus profile under transverse displacements x + w/sqrt(k).

    `x` must lie on the circle orbit of the lift; `w_direction` is a
    horizontal representative at the canonical loop representative of the
    foot of x.  Displacements are horizontal lifts of FS geodesics, with
    magnitudes tabulated in the Heisenberg transverse unit
    (TRANSVERSE_SCALE times the FS norm), the unit in which the predicted
    leading profile is exp(-|w_perp|^2).
    """
    if samples is None:
        samples = np.linspace(0.0, 1.5, 16)
    samples = np.asarray(samples, dtype=np.float64)
    xv = as_point_array(x)
    loop = state.lift.base
    foot = foot_parameters(loop, xv[None, :])[0]
    base_rep = loop.point_at(foot)
    if float(fs_distance(xv, base_rep)) > 1e-8:
        raise ContractViolation("profile point must lie on the orbit of the lift")

    wv = np.asarray(w_direction, dtype=np.complex128)
    wn = np.linalg.norm(wv)
    if wn < 1e-300:
        raise ContractViolation("direction must be nonzero")
    tangent_unit = loop.tangent_at(foot)
    tangent_unit = tangent_unit / np.linalg.norm(tangent_unit)
    w_unit = wv / wn
    # Perpendicular fraction of the direction in the real horizontal plane.
    par = np.real(np.vdot(tangent_unit, w_unit))
    skew = np.imag(np.vdot(tangent_unit, w_unit))  # component along J * tangent
    perp_fraction = abs(skew)
    if abs(par ** 2 + skew ** 2 - 1.0) > 1e-9:
        raise ContractViolation("direction must be horizontal at the foot of x")

    phase = np.vdot(base_rep, xv)  # unit: x = phase * base_rep
    w_at_x = phase * w_unit
    theta = samples / math.sqrt(state.k)  # C^2 angle = transverse unit / sqrt(k)
    displaced = (np.cos(theta)[:, None] * xv[None, :]
                 + np.sin(theta)[:, None] * w_at_x[None, :])
    base_val = abs(complex(state.evaluate(xv[None, :])[0]))
    if base_val == 0.0:
        raise OutsideAdmissibleSetError("projection vanishes at the profile point")
    vals = np.abs(state.evaluate(displaced)) / base_val
    w_perp = samples * perp_fraction
    return ProfileTable(w_norm=samples, w_perp_norm=w_perp, ratio=vals,
                        gaussian=np.exp(-w_perp ** 2))


def decay_check(lift: PlanckianLift, hw: HalfWeight, x, ks: Sequence[int],
                min_distance: float = 0.2 * SPHERE_DIAMETER) -> asymptotics.DecayReport:
    """Super-polynomial decay report for |u_k(x)| at an off-loop point.

    Points closer than `min_distance` to the loop yield an inconclusive
    report rather than a verdict.
    """
    xv = as_point_array(x)
    dist = float(np.min(fs_distance(xv[None, :], lift.base.points)))
    admissible = [k for k in ks if k % lift.winding == 0]
    values = []
    for k in admissible:
        state = bpu_map(lift, hw, k)
        values.append(abs(complex(state.evaluate(xv[None, :])[0])))
    report = asymptotics.superpoly_decay(list(zip(admissible, values)))
    if dist < min_distance:
        return asymptotics.DecayReport(ks=report.ks, values=report.values,
                                       dyad_ks=report.dyad_ks, slopes=report.slopes,
                                       passed=False, threshold=report.threshold,
                                       inconclusive=True)
    return report
