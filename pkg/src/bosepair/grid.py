"""Periodic grid, spectral Laplacian, convolution and interaction potentials.

Fields are flat complex arrays of length ``M**dim`` in C order.  Every
integral carries the volume weight ``h**dim``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class GridSpec:
    dim: int
    M: int
    L: float
    h: float = field(init=False)
    xi2: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if int(self.M) != self.M or self.M < 2:
            raise ConfigurationError(f"points per axis must be an integer >= 2, got {self.M}")
        if not self.L > 0:
            raise ConfigurationError(f"box length must be positive, got {self.L}")
        object.__setattr__(self, "h", self.L / self.M)
        k1 = 2 * np.pi * np.fft.fftfreq(self.M, d=self.h)
        k2 = sum(np.meshgrid(*([k1**2] * self.dim), indexing="ij"))
        k2.setflags(write=False)
        object.__setattr__(self, "xi2", k2)

    @property
    def shape(self):
        return (self.M,) * self.dim

    @property
    def n(self):
        return self.M**self.dim

    @property
    def weight(self):
        return self.h**self.dim

    def coords(self):
        """Grid points x_j = j*h, one array per axis, flattened."""
        ax = np.arange(self.M) * self.h
        return [g.ravel() for g in np.meshgrid(*([ax] * self.dim), indexing="ij")]

    def min_image(self):
        """Signed minimal-image displacement of every grid point from the origin."""
        j = np.arange(self.M)
        s = np.where(j <= self.M // 2, j, j - self.M) * self.h
        return [g.ravel() for g in np.meshgrid(*([s] * self.dim), indexing="ij")]

    def check(self, f):
        f = np.asarray(f)
        if f.shape[-1] != self.n:
            raise DimensionError(f"field of length {f.shape[-1]} on a grid of {self.n} points")
        return f

    def laplacian_matrix(self):
        """Dense real symmetric matrix of the spectral Laplacian."""
        D = np.real(laplacian(self, np.eye(self.n)))
        return 0.5 * (D + D.T)


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "gaussian"
    strength: float = 0.05
    width: float = 1.0
    cutoff: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "mollified_coulomb", "zero"):
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        if self.kind != "zero" and not self.width > 0:
            raise ConfigurationError(f"potential width must be positive, got {self.width}")
        if self.cutoff is not None and not self.cutoff > 0:
            raise ConfigurationError(f"cutoff radius must be positive, got {self.cutoff}")


def bump(r, R):
    """Smooth compactly supported cutoff, equal to 1 at r = 0 and 0 for r >= R."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < R
    s = (r[inside] / R) ** 2
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s))
    return out


def sample_potential(grid: GridSpec, spec: PotentialSpec) -> np.ndarray:
    """Real, even potential on the grid, indexed by displacement from the origin."""
    r2 = sum(c**2 for c in grid.min_image())
    if spec.kind == "zero":
        v = np.zeros(grid.n)
    elif spec.kind == "gaussian":
        v = spec.strength * np.exp(-r2 / (2 * spec.width**2))
    else:
        # v(0) = strength / width
        v = spec.strength / np.sqrt(r2 + spec.width**2)
    if spec.cutoff is not None:
        v = v * bump(np.sqrt(r2), spec.cutoff)
    return symmetrize_even(grid, v)


def reflect(grid: GridSpec, f):
    """f(-x) on the torus."""
    idx = (-np.arange(grid.M)) % grid.M
    g = np.asarray(f).reshape(grid.shape)
    for ax in range(grid.dim):
        g = np.take(g, idx, axis=ax)
    return g.ravel()


def symmetrize_even(grid: GridSpec, v):
    v = 0.5 * (np.asarray(v) + reflect(grid, v))
    return np.ascontiguousarray(v.real)


def build_domain(dim, M, L, potential: PotentialSpec):
    grid = GridSpec(dim, M, L)
    return grid, sample_potential(grid, potential)


def _fft(grid, f):
    return np.fft.fftn(f.reshape(f.shape[:-1] + grid.shape), axes=tuple(range(-grid.dim, 0)))


def _ifft(grid, F):
    out = np.fft.ifftn(F, axes=tuple(range(-grid.dim, 0)))
    return out.reshape(out.shape[: -grid.dim] + (grid.n,))


def laplacian(grid: GridSpec, f):
    """Spectral Laplacian along the last axis (batched over leading axes)."""
    f = grid.check(f)
    return _ifft(grid, -grid.xi2 * _fft(grid, f))


def convolve(grid: GridSpec, v, f):
    """(v*f)(x) = h^d sum_y v(x-y) f(y), via FFT."""
    v = grid.check(v)
    f = grid.check(f)
    return grid.weight * _ifft(grid, _fft(grid, v) * _fft(grid, f))


def spectral_apply(grid: GridSpec, f, op: str, v=None):
    if op == "laplacian":
        return laplacian(grid, f)
    if op == "convolve":
        if v is None:
            raise ConfigurationError("convolve needs a potential")
        return convolve(grid, v, f)
    raise ConfigurationError(f"unknown operator tag {op!r}")


def pair_matrix(grid: GridSpec, v):
    """Matrix V[i, j] = v(x_i - x_j)."""
    v = grid.check(v)
    idx = np.indices(grid.shape).reshape(grid.dim, -1)
    diff = (idx[:, :, None] - idx[:, None, :]) % grid.M
    flat = np.ravel_multi_index(tuple(diff), grid.shape)
    return v[flat]


def l2_inner(grid: GridSpec, f, g):
    f = grid.check(f)
    g = grid.check(g)
    return grid.weight * np.sum(f * np.conj(g), axis=-1)


def l2_norm(grid: GridSpec, f):
    return np.sqrt(np.real(l2_inner(grid, f, f)))
