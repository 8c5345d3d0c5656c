"""Hartree equation with the sign convention  i phi_t + Lap phi + (v*|phi|^2) phi = 0.

Note the free flow is exp(+i Lap t), i.e. Fourier modes rotate as
exp(-i |xi|^2 t).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as G
from .errors import ConfigurationError, DivergenceError, InstabilityError

MASS_DRIFT_LIMIT = 1e-6


@dataclass(frozen=True)
class HartreeTrajectory:
    t: np.ndarray
    phi: np.ndarray  # (nt, n)
    mass: np.ndarray
    energy: np.ndarray

    @property
    def dt(self):
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0


def mean_field(grid, v, phi):
    return np.real(G.convolve(grid, v, np.abs(phi) ** 2))


def hartree_rhs(grid, phi, v):
    return 1j * (G.laplacian(grid, phi) + mean_field(grid, v, phi) * phi)


def conserved_quantities(grid, phi, v):
    mass = float(np.real(G.l2_inner(grid, phi, phi)))
    kinetic = -np.real(G.l2_inner(grid, G.laplacian(grid, phi), phi))
    rho = np.abs(phi) ** 2
    pot = 0.5 * grid.weight * np.sum(mean_field(grid, v, phi) * rho)
    return mass, float(kinetic - pot)


def energy_gradient(grid, phi, v):
    """dE/d(conj phi); dE[eta] = 2 Re <grad, eta>.  Equals i * hartree_rhs."""
    return -(G.laplacian(grid, phi) + mean_field(grid, v, phi) * phi)


def strang_step(grid, phi, v, dt, free=None):
    if free is None:
        free = np.exp(-1j * grid.xi2 * dt)
    phi = phi * np.exp(0.5j * dt * mean_field(grid, v, phi))
    phi = G._ifft(grid, free * G._fft(grid, phi))
    return phi * np.exp(0.5j * dt * mean_field(grid, v, phi))


def hartree_evolve(grid, phi0, v, dt, n_steps, check_norm=True):
    phi0 = grid.check(np.asarray(phi0, dtype=complex))
    if dt == 0:
        raise ConfigurationError("dt must be nonzero")
    if check_norm and abs(G.l2_norm(grid, phi0) - 1.0) > 1e-10:
        raise ConfigurationError("initial datum must have unit L2 norm")
    free = np.exp(-1j * grid.xi2 * dt)
    phi = np.empty((n_steps + 1, grid.n), dtype=complex)
    phi[0] = phi0
    for j in range(n_steps):
        phi[j + 1] = strang_step(grid, phi[j], v, dt, free)
        if not np.all(np.isfinite(phi[j + 1])):
            raise DivergenceError(f"non-finite field at step {j + 1}")
    mass = np.real(G.l2_inner(grid, phi, phi))
    rho = np.abs(phi) ** 2
    kinetic = -np.real(G.l2_inner(grid, G.laplacian(grid, phi), phi))
    pot = 0.5 * grid.weight * np.sum(mean_field(grid, v, phi) * rho, axis=-1)
    energy = kinetic - pot
    drift = float(np.max(np.abs(mass - mass[0])))
    if drift > MASS_DRIFT_LIMIT:
        raise InstabilityError(f"mass drift {drift:.3e} exceeds {MASS_DRIFT_LIMIT}")
    return HartreeTrajectory(np.arange(n_steps + 1) * dt, phi, mass, energy)


def self_convergence(grid, phi0, v, dt, n_steps, refine=8):
    """Error ratio e(dt)/e(dt/2) against a reference at dt/refine."""
    def final(m):
        return hartree_evolve(grid, phi0, v, dt / m, n_steps * m).phi[-1]

    ref = final(refine)
    e1 = G.l2_norm(grid, final(1) - ref)
    e2 = G.l2_norm(grid, final(2) - ref)
    return e1 / e2, e1, e2


def gaussian_datum(grid, width=1.0, center=None, momentum=0):
    """Normalized Gaussian wave packet; momentum is an integer grid mode per axis."""
    if not width > 0:
        raise ConfigurationError("initial width must be positive")
    xs = grid.coords()
    if center is None:
        center = [grid.L / 2] * grid.dim
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    r2 = np.zeros(grid.n)
    for x, c in zip(xs, center):
        d = (x - c + grid.L / 2) % grid.L - grid.L / 2
        r2 += d**2
    modes = np.broadcast_to(np.asarray(momentum), (grid.dim,))
    phase = sum(2 * np.pi * m * x / grid.L for m, x in zip(modes, xs))
    f = np.exp(-r2 / (2 * width**2)) * np.exp(1j * phase)
    return normalize(grid, f)


def plane_wave(grid, mode=1):
    modes = np.broadcast_to(np.asarray(mode), (grid.dim,))
    phase = sum(2 * np.pi * m * x / grid.L for m, x in zip(modes, grid.coords()))
    return normalize(grid, np.exp(1j * phase))


def normalize(grid, f):
    nrm = G.l2_norm(grid, f)
    if not nrm > 0:
        raise ConfigurationError("initial datum vanishes identically")
    return np.asarray(f, dtype=complex) / nrm


def initial_datum(grid, spec):
    kind = spec.get("kind", "gaussian")
    if kind == "gaussian":
        return gaussian_datum(grid, spec.get("width", 1.0), spec.get("center"), spec.get("momentum", 0))
    if kind == "plane_wave":
        return plane_wave(grid, spec.get("mode", 1))
    if kind == "file":
        path = spec["path"]
        data = np.load(path) if str(path).endswith(".npy") else np.loadtxt(path, dtype=complex)
        return normalize(grid, grid.check(np.ravel(data)))
    raise ConfigurationError(f"unknown initial datum kind {kind!r}")
