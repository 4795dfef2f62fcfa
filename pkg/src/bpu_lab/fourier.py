"""Spectral utilities on uniform periodic grids.

All loops, weights and tangent data in this package live on uniform nodes
phi_j = 2*pi*j/N of the circle.  Derivatives and off-node evaluations are
spectral (trigonometric), so analytic data is resolved to machine precision
long before quadrature error matters.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "grid_nodes",
    "mode_numbers",
    "spectral_derivative",
    "trapezoid",
    "tail_fraction",
    "TrigInterpolator",
]

TWO_PI = 2.0 * np.pi


def grid_nodes(n: int) -> NDArray[np.float64]:
    """Uniform periodic nodes phi_j = 2*pi*j/n."""
    return TWO_PI * np.arange(n) / n


def mode_numbers(n: int) -> NDArray[np.int64]:
    """Integer Fourier modes in FFT order: 0..n/2-1, -n/2..-1."""
    return (np.fft.fftfreq(n) * n).astype(np.int64)


def spectral_derivative(samples: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivative d^order/dphi^order of periodic samples along axis 0.

    The Nyquist mode is zeroed for odd orders (the standard symmetric
    convention); for analytic data its coefficient is negligible anyway.
    """
    n = samples.shape[0]
    m = mode_numbers(n).astype(np.float64)
    factor = (1j * m) ** order
    if order % 2 == 1:
        factor[n // 2] = 0.0
    shape = (n,) + (1,) * (samples.ndim - 1)
    out = np.fft.ifft(np.fft.fft(samples, axis=0) * factor.reshape(shape), axis=0)
    if np.isrealobj(samples):
        return out.real
    return out


def trapezoid(values: np.ndarray, axis: int = 0) -> np.ndarray | float:
    """Periodic trapezoid rule over [0, 2*pi): sum * 2*pi/N.

    Spectrally accurate for smooth periodic integrands and exact (to
    rounding) for trigonometric polynomials of degree < N.
    """
    n = values.shape[axis]
    res = values.sum(axis=axis) * (TWO_PI / n)
    return res


def tail_fraction(samples: np.ndarray, band: float = 1.0 / 6.0) -> float:
    """Relative spectral energy in the top `band` fraction of modes.

    Used as a smoothness / periodicity residual: analytic periodic data on
    an adequate grid has a tail at rounding level.
    """
    coeffs = np.fft.fft(np.asarray(samples), axis=0)
    n = coeffs.shape[0]
    m = np.abs(mode_numbers(n))
    cutoff = (0.5 - band) * n
    energy = np.abs(coeffs) ** 2
    if energy.ndim > 1:
        energy = energy.sum(axis=tuple(range(1, energy.ndim)))
    total = float(energy.sum())
    if total == 0.0:
        return 0.0
    return float(np.sqrt(energy[m >= cutoff].sum() / total))


class TrigInterpolator:
    """Trigonometric interpolant of periodic samples (axis 0 is the node axis).

    Evaluation and derivatives at arbitrary angles use the full centered
    spectrum; the single unpaired Nyquist mode is realized as cos(N/2*phi)
    so real samples interpolate to real values.
    """

    def __init__(self, samples: np.ndarray):
        samples = np.asarray(samples)
        self._real = np.isrealobj(samples)
        self.n = samples.shape[0]
        self.coeffs = np.fft.fft(samples, axis=0) / self.n
        self.modes = mode_numbers(self.n).astype(np.float64)

    def _basis(self, phi: np.ndarray, order: int) -> np.ndarray:
        phi = np.atleast_1d(np.asarray(phi, dtype=np.float64))
        m = self.modes
        mat = np.exp(1j * np.outer(phi, m))
        if order > 0:
            mat = mat * (1j * m) ** order
        # Nyquist column: e^{-i(N/2)phi} + its mirror collapse to cos((N/2)phi).
        half = self.n // 2
        if 2 * half == self.n:
            w = 0.5 * self.n * phi  # (N/2)*phi
            cyc = order % 4
            nyq = [np.cos(w), -np.sin(w), -np.cos(w), np.sin(w)][cyc]
            mat[:, half] = (0.5 * self.n) ** order * nyq
        return mat

    def __call__(self, phi: np.ndarray) -> np.ndarray:
        return self._eval(phi, 0)

    def derivative(self, phi: np.ndarray, order: int = 1) -> np.ndarray:
        return self._eval(phi, order)

    def _eval(self, phi: np.ndarray, order: int) -> np.ndarray:
        scalar = np.isscalar(phi) or (np.ndim(phi) == 0)
        mat = self._basis(phi, order)
        vals = np.tensordot(mat, self.coeffs, axes=(1, 0))
        if self._real:
            vals = vals.real
        if scalar:
            return vals[0]
        return vals
