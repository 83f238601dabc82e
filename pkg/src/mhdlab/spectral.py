"""Periodic-box Fourier infrastructure.

Conventions used throughout the package:

* Physical arrays have shape ``(..., N, ..., N)`` with the last ``n`` axes
  spatial; vector fields are stacked on axis 0, so a velocity on a 2D grid
  has shape ``(2, N, N)``.  Sample ``j`` along an axis sits at
  ``x_j = -L/2 + j L / N``.
* Spectral arrays use the full complex lattice in FFT order (index ``i``
  holds ``m = fftfreq(N) * N``) and store Fourier-series coefficients,
  ``v_hat = fft(v) / N**n``.  With this choice the box integral of
  ``|v|**2`` equals ``L**n * sum(|v_hat|**2)`` and every norm below is a
  box integral.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import ConfigurationError, ShapeError


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L/2, L/2)**n`` with its wavenumber lattice."""

    n: int
    N: int
    L: float

    def __post_init__(self):
        errors = []
        if self.n not in (2, 3):
            errors.append(f"dimension n must be 2 or 3, got {self.n}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 8 or self.N % 2:
            errors.append(f"N must be an even integer >= 8, got {self.N}")
        if not self.L > 0 or not np.isfinite(self.L):
            errors.append(f"period L must be positive, got {self.L}")
        if errors:
            raise ConfigurationError("; ".join(errors))

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def axes(self):
        return tuple(range(-self.n, 0))

    @property
    def dx(self):
        return self.L / self.N

    @property
    def volume(self):
        return self.L**self.n

    @cached_property
    def m(self):
        """Integer lattice index per axis, FFT order."""
        return np.fft.fftfreq(self.N, 1.0 / self.N).round().astype(np.int64)

    @cached_property
    def k1d(self):
        return 2.0 * np.pi * self.m / self.L

    @cached_property
    def K(self):
        """Wavenumber components, shape ``(n, N, ..., N)``."""
        return np.stack(np.meshgrid(*([self.k1d] * self.n), indexing="ij"))

    @cached_property
    def k2(self):
        return np.sum(self.K**2, axis=0)

    @cached_property
    def kmag(self):
        return np.sqrt(self.k2)

    @cached_property
    def inv_k2(self):
        out = np.zeros_like(self.k2)
        nz = self.k2 > 0
        out[nz] = 1.0 / self.k2[nz]
        return out

    @cached_property
    def dealias_mask(self):
        mm = np.abs(self.m)
        keep = mm <= self.N / 3.0
        grids = np.meshgrid(*([keep] * self.n), indexing="ij")
        return np.logical_and.reduce(grids)

    @cached_property
    def nyquist_free(self):
        """False on modes with some ``m_j = -N/2``; their derivatives are not real."""
        return self.max_index < self.N // 2

    @cached_property
    def max_index(self):
        """Per-mode ``max_j |m_j|``."""
        mm = np.abs(self.m)
        return np.maximum.reduce(np.meshgrid(*([mm] * self.n), indexing="ij"))

    def coords(self):
        x = -0.5 * self.L + self.dx * np.arange(self.N)
        return np.stack(np.meshgrid(*([x] * self.n), indexing="ij"))


def build_grid(n, N, L):
    """Validate parameters and return a :class:`Grid`."""
    return Grid(int(n), int(N), float(L))


def _check_shape(a, grid):
    a = np.asarray(a)
    if a.shape[a.ndim - grid.n:] != grid.shape or a.ndim < grid.n:
        raise ShapeError(f"array shape {a.shape} does not end in grid shape {grid.shape}")
    return a


def transform_forward(v, grid):
    """Physical samples to Fourier-series coefficients (normalized by ``N**n``)."""
    v = _check_shape(v, grid)
    return scipy.fft.fftn(v, axes=grid.axes, norm="forward")


def transform_inverse(v_hat, grid):
    """Fourier-series coefficients to complex physical samples.

    Callers that need a real field take ``.real``; the imaginary part is
    round-off for Hermitian input.
    """
    v_hat = _check_shape(v_hat, grid)
    return scipy.fft.ifftn(v_hat, axes=grid.axes, norm="forward")


def to_physical(v_hat, grid):
    return transform_inverse(v_hat, grid).real


def hermitian_partner(v_hat, grid):
    """Return ``conj(v_hat(-k))`` on the lattice."""
    a = np.flip(v_hat, axis=grid.axes)
    a = np.roll(a, 1, axis=grid.axes)
    return np.conj(a)


def hermitian_defect(v_hat, grid):
    """Max ``|v_hat(k) - conj(v_hat(-k))|``; zero for real fields."""
    v_hat = _check_shape(v_hat, grid)
    return float(np.max(np.abs(v_hat - hermitian_partner(v_hat, grid)), initial=0.0))


def symmetrize(v_hat, grid):
    """Project coefficients onto the Hermitian-symmetric (real-field) subspace."""
    return 0.5 * (v_hat + hermitian_partner(v_hat, grid))


def leray_project(v_hat, grid):
    """Orthogonal projection onto divergence-free fields; ``k = 0`` passes through.

    Modes with some ``m_j = -N/2`` are zeroed: the lattice stores the
    Hermitian partner of such a mode at a wavevector other than ``-k``, so
    the projector there would not map real fields to real fields.
    """
    v_hat = _check_shape(v_hat, grid)
    if v_hat.shape[0] != grid.n:
        raise ShapeError(f"expected {grid.n} components, got {v_hat.shape[0]}")
    kdotv = np.sum(grid.K * v_hat, axis=0)
    return np.where(grid.nyquist_free, v_hat - grid.K * (kdotv * grid.inv_k2), 0.0)


def divergence_defect(v_hat, grid):
    """Max over ``k != 0`` of ``|k . v_hat(k)|``."""
    return float(np.max(np.abs(np.sum(grid.K * v_hat, axis=0)), initial=0.0))


def dealias_23(v_hat, grid):
    """Zero every coefficient with some ``|m_j| > N/3``."""
    v_hat = _check_shape(v_hat, grid)
    return np.where(grid.dealias_mask, v_hat, 0.0)


def l2_norm_sq(v_hat, grid):
    """Box integral of ``|v|**2`` via Plancherel."""
    return float(grid.volume * np.sum(np.abs(v_hat) ** 2))


def gradient_norm_sq(v_hat, grid):
    """Box integral of ``|grad v|**2``, i.e. ``L**n * sum |k|**2 |v_hat|**2``."""
    v_hat = _check_shape(v_hat, grid)
    return float(grid.volume * np.sum(grid.k2 * np.abs(v_hat) ** 2))


def heat_multiplier(grid, t, diffusivity=1.0):
    return np.exp(-diffusivity * grid.k2 * t)
