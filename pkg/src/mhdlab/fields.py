"""Named initial-data generators.

Analytic generators are returned as callables ``f(X) -> field`` of the
stacked coordinate array ``X`` (shape ``(n, ...)``), so the same data can be
resampled on any box and rescaled by :func:`mhdlab.experiments.scale_data`.
Amplitude conventions:

* ``taylor-green``, ``shear-mode``: peak component value.
* ``gaussian-bump``: ``u = A (e_z x (x - c)) exp(-|x - c|^2 / 2 width^2)``,
  a swirl about the z axis (in 2D the rotated position vector).
* ``random-solenoidal``: requested box L2 norm.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .spectral import dealias_23, leray_project, symmetrize, transform_forward

KINDS = ("zero", "taylor-green", "shear-mode", "gaussian-bump", "random-solenoidal")


def taylor_green(n, amplitude=1.0, wavenumber=1.0):
    def f(X):
        kx = wavenumber * X
        if n == 2:
            return amplitude * np.stack([
                np.sin(kx[0]) * np.cos(kx[1]),
                -np.cos(kx[0]) * np.sin(kx[1]),
            ])
        cz = np.cos(kx[2])
        return amplitude * np.stack([
            np.sin(kx[0]) * np.cos(kx[1]) * cz,
            -np.cos(kx[0]) * np.sin(kx[1]) * cz,
            np.zeros_like(cz),
        ])
    return f


def shear_mode(n, amplitude=1.0, wavenumber=1.0):
    """``amplitude * sin(wavenumber * y) e_1``: a steady state of ideal MHD."""
    def f(X):
        out = np.zeros_like(X)
        out[0] = amplitude * np.sin(wavenumber * X[1])
        return out
    return f


def gaussian_bump(n, amplitude=1.0, width=1.0, center=None):
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if c.shape != (n,):
        raise ConfigurationError(f"center must have {n} entries, got {c.tolist()}")

    def f(X):
        Y = X - c.reshape((n,) + (1,) * (X.ndim - 1))
        env = amplitude * np.exp(-np.sum(Y**2, axis=0) / (2.0 * width**2))
        out = np.zeros_like(X)
        out[0] = -Y[1] * env
        out[1] = Y[0] * env
        return out
    return f


def random_solenoidal(grid, norm=1.0, k_lo=1.0, k_hi=4.0, seed=0):
    """Band-limited random divergence-free field with box L2 norm ``norm``.

    Modes with ``k_lo <= |k| <= k_hi`` get unit-variance complex Gaussian
    coefficients; the result is Hermitian-symmetrized, projected and scaled.
    """
    rng = np.random.default_rng(seed)
    shape = (grid.n,) + grid.shape
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    band = (grid.kmag >= k_lo) & (grid.kmag <= k_hi)
    v = symmetrize(np.where(band, w, 0.0), grid)
    v = leray_project(v, grid)
    v[(slice(None),) + (0,) * grid.n] = 0.0
    e = np.sqrt(grid.volume * np.sum(np.abs(v) ** 2))
    if e == 0.0:
        raise ConfigurationError(f"no lattice modes in band [{k_lo}, {k_hi}]")
    return v * (norm / e)


def prepare(v_hat, grid, dealias=True):
    """Enforce the simulation conventions: real, mean-zero, solenoidal, truncated."""
    v = symmetrize(np.asarray(v_hat, dtype=complex), grid)
    v = leray_project(v, grid)
    v[(slice(None),) + (0,) * grid.n] = 0.0
    if dealias:
        v = dealias_23(v, grid)
    return v


def sample(f, grid):
    """Sample a physical-space generator and return its spectral coefficients."""
    return transform_forward(f(grid.coords()), grid)


@dataclass(frozen=True)
class FieldSpec:
    """A named generator plus its parameters, as read from a run config."""

    kind: str = "zero"
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple = ()
    mode: int = 1
    k_lo: float = 1.0
    k_hi: float = 4.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown data generator {self.kind!r}; choose from {KINDS}")

    @property
    def analytic(self):
        return self.kind != "random-solenoidal"

    def function(self, n, L):
        """Physical-space callable; ``mode`` is measured on a box of period ``L``."""
        k0 = 2.0 * np.pi * self.mode / L
        if self.kind == "zero":
            return lambda X: np.zeros_like(X)
        if self.kind == "taylor-green":
            return taylor_green(n, self.amplitude, k0)
        if self.kind == "shear-mode":
            return shear_mode(n, self.amplitude, k0)
        if self.kind == "gaussian-bump":
            return gaussian_bump(n, self.amplitude, self.width, self.center or None)
        raise ConfigurationError("random-solenoidal data has no physical-space generator")

    def spectral(self, grid, seed=0):
        if self.kind == "random-solenoidal":
            return random_solenoidal(grid, self.amplitude, self.k_lo, self.k_hi, seed)
        return sample(self.function(grid.n, grid.L), grid)
