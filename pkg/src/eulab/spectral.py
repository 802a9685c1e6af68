"""Periodic-grid scalar fields and Fourier-multiplier operators.

The physical domain is the square [-L/2, L/2)^2 sampled on an n x n grid
(n a power of two).  A field is stored jointly as real grid samples and as
rfft2 coefficients; the two representations are synchronized lazily and the
pair is treated as an immutable value after construction.

All operators in this module are diagonal in Fourier space (derivatives,
inverse Laplacian, Riesz transforms, Biot-Savart, dealiasing, frequency
projections) and therefore preserve the grid parities of their inputs up
to roundoff.

Conventions:
    - values[i, j] = f(x1_i, x2_j) with x_i = -L/2 + i*h, h = L/n.
    - coeffs = rfft2(values); axis 0 carries the full fftfreq ladder for
      k1, axis 1 the non-negative rfftfreq ladder for k2.
    - Physical wavenumbers are 2*pi*m/L for integer m.
    - Nyquist rows/columns are zeroed by differentiation-type operators so
      that derivative multipliers stay skew-symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "GridSpec2D",
    "SpectralField2D",
    "VelocityField2D",
    "biot_savart",
    "riesz",
    "velocity_gradient",
    "derivative",
    "dealias",
    "MeanZeroError",
    "odd_reflection_residual",
    "even_reflection_residual",
]


class MeanZeroError(ValueError):
    """Raised when an operator requiring mean-zero input gets a nonzero mode."""

    def __init__(self, zero_mode: float, scale: float):
        self.zero_mode = zero_mode
        self.scale = scale
        super().__init__(
            f"input must be mean-zero: |zero mode| = {zero_mode:.3e} "
            f"exceeds 1e-12 * L2 scale ({scale:.3e}); Biot-Savart/Riesz on "
            f"the torus requires mean-zero vorticity"
        )


@dataclass(frozen=True)
class GridSpec2D:
    """Uniform periodic grid on the square [-L/2, L/2)^2.

    Attributes:
        n: points per side; must be a power of two and >= 16.
        box_length: physical side length L > 0.
    """

    n: int
    box_length: float

    def __post_init__(self):
        if self.n < 16 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def h(self) -> float:
        """Grid spacing L/n."""
        return self.box_length / self.n

    def axis(self) -> np.ndarray:
        """1D coordinate axis, x_i = -L/2 + i*h."""
        return -0.5 * self.box_length + self.h * np.arange(self.n)

    def meshgrid(self):
        """(X1, X2) coordinate arrays, shape (n, n), 'ij' indexing."""
        x = self.axis()
        return np.meshgrid(x, x, indexing="ij")

    def wavenumbers(self):
        """(K1, K2) physical wavenumber arrays for the rfft2 layout."""
        return _wavenumbers(self.n, self.box_length)

    def k_abs(self) -> np.ndarray:
        """|k| on the rfft2 layout."""
        k1, k2 = self.wavenumbers()
        return np.hypot(k1, k2)

    def rfft_weights(self) -> np.ndarray:
        """Multiplicity weights of the half-spectrum (2 for interior k2 columns)."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    @property
    def dealias_band(self) -> int:
        """Largest retained integer mode index under the 2/3 rule."""
        return self.n // 3


@lru_cache(maxsize=32)
def _wavenumbers(n: int, box_length: float):
    h = box_length / n
    k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=h)[:, None]
    k2 = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)[None, :]
    return k1, k2


def _zero_nyquist(coeffs: np.ndarray) -> np.ndarray:
    """Zero the k = -n/2 row and k = n/2 column (in place; returns coeffs)."""
    n = coeffs.shape[0]
    coeffs[n // 2, :] = 0.0
    coeffs[:, -1] = 0.0
    return coeffs


class SpectralField2D:
    """Real scalar field on a GridSpec2D with lazily synchronized spectrum.

    Construct via from_values / from_coeffs.  Instances are value-like:
    the sample array is marked read-only and operators always return new
    fields, so sharing across threads is safe.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: GridSpec2D, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ValueError("need values or coeffs")
        self.grid = grid
        if values is not None:
            values = np.asarray(values, dtype=np.float64)
            if values.shape != (grid.n, grid.n):
                raise ValueError(f"values shape {values.shape} != {(grid.n, grid.n)}")
            values = values.copy()
            values.flags.writeable = False
        self._values = values
        if coeffs is not None:
            coeffs = np.asarray(coeffs, dtype=np.complex128)
            if coeffs.shape != (grid.n, grid.n // 2 + 1):
                raise ValueError("bad coeffs shape")
            coeffs = coeffs.copy()
            coeffs.flags.writeable = False
        self._coeffs = coeffs

    @classmethod
    def from_values(cls, grid: GridSpec2D, values) -> "SpectralField2D":
        return cls(grid, values=values)

    @classmethod
    def from_coeffs(cls, grid: GridSpec2D, coeffs) -> "SpectralField2D":
        return cls(grid, coeffs=coeffs)

    @classmethod
    def from_function(cls, grid: GridSpec2D, fn) -> "SpectralField2D":
        x1, x2 = grid.meshgrid()
        return cls(grid, values=fn(x1, x2))

    @classmethod
    def zeros(cls, grid: GridSpec2D) -> "SpectralField2D":
        return cls(grid, values=np.zeros((grid.n, grid.n)))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            v = np.fft.irfft2(self._coeffs, s=(self.grid.n, self.grid.n))
            v.flags.writeable = False
            self._values = v
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            c = np.fft.rfft2(self._values)
            c.flags.writeable = False
            self._coeffs = c
        return self._coeffs

    # -- basic quantities ------------------------------------------------

    def zero_mode(self) -> float:
        """Mean value of the field (zero-frequency coefficient / n^2)."""
        return float(np.real(self.coeffs[0, 0])) / self.grid.n**2

    def l2(self) -> float:
        """L2 norm with physical cell measure h^2."""
        return float(np.sqrt(np.sum(self.values**2))) * self.grid.h

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l1(self) -> float:
        return float(np.sum(np.abs(self.values))) * self.grid.h**2

    @property
    def mean_zero(self) -> bool:
        return abs(self.zero_mode()) <= 1e-12 * max(self.l2(), 1e-300)

    def require_mean_zero(self):
        zm = abs(self.zero_mode())
        scale = max(self.l2(), 1e-300)
        if zm > 1e-12 * scale:
            raise MeanZeroError(zm, scale)

    # -- algebra ----------------------------------------------------------

    def __add__(self, other: "SpectralField2D") -> "SpectralField2D":
        self._check_same_grid(other)
        return SpectralField2D(self.grid, values=self.values + other.values)

    def __sub__(self, other: "SpectralField2D") -> "SpectralField2D":
        self._check_same_grid(other)
        return SpectralField2D(self.grid, values=self.values - other.values)

    def __mul__(self, scalar: float) -> "SpectralField2D":
        return SpectralField2D(self.grid, values=self.values * scalar)

    __rmul__ = __mul__

    def _check_same_grid(self, other):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def apply_multiplier(self, mult: np.ndarray) -> "SpectralField2D":
        """Return the field with spectrum mult * coeffs (mult real or complex)."""
        return SpectralField2D(self.grid, coeffs=self.coeffs * mult)


@dataclass(frozen=True)
class VelocityField2D:
    """Divergence-free velocity (u1, u2) on a shared grid."""

    u1: SpectralField2D
    u2: SpectralField2D

    @property
    def grid(self) -> GridSpec2D:
        return self.u1.grid

    def max_speed(self) -> float:
        return float(np.max(np.hypot(self.u1.values, self.u2.values)))

    def divergence(self) -> SpectralField2D:
        return derivative(self.u1, 0) + derivative(self.u2, 1)

    def divergence_residual(self) -> float:
        """|div u|_2 relative to |u|_2 (the VelocityField2D invariant)."""
        unorm = np.sqrt(self.u1.l2() ** 2 + self.u2.l2() ** 2)
        if unorm == 0.0:
            return 0.0
        return self.divergence().l2() / unorm


# -- multiplier operators --------------------------------------------------


def derivative(f: SpectralField2D, axis: int) -> SpectralField2D:
    """Spectral partial derivative along axis (0 -> x1, 1 -> x2)."""
    k1, k2 = f.grid.wavenumbers()
    mult = 1j * (k1 if axis == 0 else k2)
    c = f.coeffs * mult
    _zero_nyquist(c)
    return SpectralField2D(f.grid, coeffs=c)


def gradient(f: SpectralField2D):
    """(d1 f, d2 f)."""
    return derivative(f, 0), derivative(f, 1)


def inverse_laplacian(f: SpectralField2D) -> SpectralField2D:
    """Solve Laplace(psi) = f with the zero mode of psi gauged to zero."""
    f.require_mean_zero()
    k1, k2 = f.grid.wavenumbers()
    k2abs = k1**2 + k2**2
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = np.where(k2abs > 0, -1.0 / np.where(k2abs > 0, k2abs, 1.0), 0.0)
    return f.apply_multiplier(mult)


def biot_savart(omega: SpectralField2D) -> VelocityField2D:
    """Velocity recovery u = Laplace^{-1} grad^perp omega.

    The returned velocity is divergence-free by construction; the zero mode
    of the inverse Laplacian is gauged to zero.

    Raises:
        MeanZeroError: when omega carries a zero-frequency component larger
            than 1e-12 of its L2 norm.
    """
    omega.require_mean_zero()
    k1, k2 = omega.grid.wavenumbers()
    k2abs = k1**2 + k2**2
    safe = np.where(k2abs > 0, k2abs, 1.0)
    # u1 = -Laplace^{-1} d2 omega, u2 = +Laplace^{-1} d1 omega
    m1 = 1j * k2 / safe
    m2 = -1j * k1 / safe
    m1[0, 0] = 0.0
    m2[0, 0] = 0.0
    c = omega.coeffs
    c1 = m1 * c
    c2 = m2 * c
    _zero_nyquist(c1)
    _zero_nyquist(c2)
    return VelocityField2D(
        SpectralField2D(omega.grid, coeffs=c1),
        SpectralField2D(omega.grid, coeffs=c2),
    )


def riesz(omega: SpectralField2D, i: int, j: int) -> SpectralField2D:
    """Riesz transform R_ij = Laplace^{-1} d_i d_j, symbol k_i k_j / |k|^2.

    R11 + R22 is the identity on mean-zero fields.
    """
    if i not in (1, 2) or j not in (1, 2):
        raise ValueError("Riesz indices must be 1 or 2")
    omega.require_mean_zero()
    k1, k2 = omega.grid.wavenumbers()
    k2abs = k1**2 + k2**2
    safe = np.where(k2abs > 0, k2abs, 1.0)
    ki = k1 if i == 1 else k2
    kj = k1 if j == 1 else k2
    mult = ki * kj / safe
    mult[0, 0] = 0.0
    c = mult * omega.coeffs
    _zero_nyquist(c)
    return SpectralField2D(omega.grid, coeffs=c)


def velocity_gradient(omega: SpectralField2D):
    """The four entries of Du for u = biot_savart(omega).

    Returns:
        (d1u1, d2u1, d1u2, d2u2) = (-R12 w, -R22 w, R11 w, R12 w).
        The trace d1u1 + d2u2 vanishes identically.
    """
    r11 = riesz(omega, 1, 1)
    r12 = riesz(omega, 1, 2)
    r22 = riesz(omega, 2, 2)
    return (-1.0) * r12, (-1.0) * r22, r11, r12


def dealias(f: SpectralField2D) -> SpectralField2D:
    """Zero all coefficients with max(|m1|, |m2|) > n/3 (2/3 rule)."""
    return SpectralField2D(f.grid, coeffs=f.coeffs * _dealias_mask(f.grid.n))


@lru_cache(maxsize=32)
def _dealias_mask(n: int) -> np.ndarray:
    band = n // 3
    m1 = np.abs(np.fft.fftfreq(n, d=1.0 / n))[:, None]
    m2 = np.abs(np.fft.rfftfreq(n, d=1.0 / n) * n)[None, :]
    return ((m1 <= band) & (m2 <= band)).astype(np.float64)


# -- parity diagnostics ------------------------------------------------------


def _reflect(values: np.ndarray, axis: int) -> np.ndarray:
    """Samples of f(-x) along one axis on the symmetric grid (index n-i mod n)."""
    idx = (-np.arange(values.shape[axis])) % values.shape[axis]
    return np.take(values, idx, axis=axis)


def odd_reflection_residual(f: SpectralField2D, axis: int) -> float:
    """max |f(x) + f(reflected x)|, zero for an exactly odd field."""
    return float(np.max(np.abs(f.values + _reflect(f.values, axis))))


def even_reflection_residual(f: SpectralField2D, axis: int) -> float:
    """max |f(x) - f(reflected x)|, zero for an exactly even field."""
    return float(np.max(np.abs(f.values - _reflect(f.values, axis))))
