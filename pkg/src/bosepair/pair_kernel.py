"""Pair-excitation kernel k(t, x, y): Duhamel solver and Picard iteration.

The kernel equation is solved in the fixed-point form  S k = F(k, Sk)  with
S = i d/dt - Lap_x - Lap_y and

    F = m + S(k - u) - (g u + u g^T) + p o m + (Tp + [g, p] + u o mbar) o (1 + p)^{-1} u,

where u = sh(k), p = ch(k) - 1 and g is the potential part of the
one-body kernel.  Su and Tp come from the cached Sk by the Leibniz rule
(see kernels.sh_ch_transport), never by differencing u or p in time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import grid as G
from . import kernels as K
from .errors import ConsistencyError, DivergenceError, NonContractionError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GMPair:
    g_nl: np.ndarray  # -v(x-y) conj(phi(x)) phi(y), shape (nt, n, n)
    conv: np.ndarray  # (v*|phi|^2)(x), shape (nt, n)
    m: np.ndarray  # v(x-y) conj(phi(x)) conj(phi(y))

    def g_pot(self, w):
        """Full potential kernel, including the local term -(v*|phi|^2) delta."""
        n = self.conv.shape[-1]
        return self.g_nl - self.conv[..., :, None] * np.eye(n) / w

    def node(self, j):
        return GMPair(self.g_nl[j], self.conv[j], self.m[j])


def build_g_m(grid, phi, v):
    """g_pot and m along a trajectory of fields phi with shape (nt, n) or (n,)."""
    phi = grid.check(np.asarray(phi))
    V = G.pair_matrix(grid, v)
    pb = np.conj(phi)
    g_nl = -V * pb[..., :, None] * phi[..., None, :]
    m = V * pb[..., :, None] * pb[..., None, :]
    conv = np.real(G.convolve(grid, v, np.abs(phi) ** 2))
    return GMPair(K.enforce(g_nl, "hermitian"), conv, K.enforce(m, "symmetric"))


def g_left(gm, A, w):
    """g o A."""
    return w * (gm.g_nl @ A) - gm.conv[..., :, None] * A


def g_right(gm, A, w):
    """A o g."""
    return w * (A @ gm.g_nl) - A * gm.conv[..., None, :]


def g_sandwich(gm, u, w):
    """g o u + u o g^T."""
    gT = K.transpose(gm.g_nl)
    return w * (gm.g_nl @ u + u @ gT) - gm.conv[..., :, None] * u - u * gm.conv[..., None, :]


def g_commutator(gm, p, w):
    return g_left(gm, p, w) - g_right(gm, p, w)


# ---------------------------------------------------------------- Duhamel


def _fft2(grid, A):
    shp = A.shape[:-2] + grid.shape + grid.shape
    return np.fft.fftn(A.reshape(shp), axes=tuple(range(-2 * grid.dim, 0)))


def _ifft2(grid, A):
    out = np.fft.ifftn(A, axes=tuple(range(-2 * grid.dim, 0)))
    return out.reshape(out.shape[: -2 * grid.dim] + (grid.n, grid.n))


def pair_frequencies(grid):
    xi2 = grid.xi2
    return xi2.reshape(grid.shape + (1,) * grid.dim) + xi2.reshape((1,) * grid.dim + grid.shape)


def duhamel_solve_S(grid, F, dt):
    """k with S k = F, k(0) = 0, via the trapezoid rule per Fourier mode.

    Returns (k, Sk) where Sk is F itself.
    """
    F = np.asarray(F, dtype=complex)
    Fh = _fft2(grid, F)
    phase = np.exp(1j * pair_frequencies(grid) * dt)
    kh = np.zeros_like(Fh)
    for j in range(F.shape[0] - 1):
        kh[j + 1] = phase * (kh[j] - 0.5j * dt * Fh[j]) - 0.5j * dt * Fh[j + 1]
    k = _ifft2(grid, kh)
    k[0] = 0.0
    return k, F.copy()


def apply_S_fd(grid, k, dt):
    """i k_t - Lap_x k - Lap_y k with second-order differences in time."""
    D = grid.laplacian_matrix()
    return 1j * time_derivative(k, dt) - D @ k - k @ D


def time_derivative(A, dt):
    """Centred differences inside, one-sided second-order stencils at the ends."""
    A = np.asarray(A)
    out = np.empty_like(A)
    out[1:-1] = (A[2:] - A[:-2]) / (2 * dt)
    out[0] = (-3 * A[0] + 4 * A[1] - A[2]) / (2 * dt)
    out[-1] = (3 * A[-1] - 4 * A[-2] + A[-3]) / (2 * dt)
    return out


# ---------------------------------------------------------------- assembly


@dataclass
class Assembly:
    """Everything the reduction formulas need at each node."""

    k: np.ndarray
    Sk: np.ndarray
    u: np.ndarray
    p: np.ndarray
    Su: np.ndarray
    Tp: np.ndarray
    Gu: np.ndarray = field(default=None)
    gp: np.ndarray = field(default=None)
    ch_inv_u: np.ndarray = field(default=None)


def assemble(gm, k, Sk, w, tail_tol=1e-15):
    u, p, Su, Tp = K.sh_ch_transport(k, Sk, w, tail_tol)
    a = Assembly(k, Sk, u, p, Su, Tp)
    a.Gu = g_sandwich(gm, u, w)
    a.gp = g_commutator(gm, p, w)
    a.ch_inv_u = K.solve_one_plus_p(p, u, w)
    return a


def rhs_F(gm, k, Sk, w, symmetric=True):
    """Right-hand side of S k = F(k, Sk); also returns the assembly."""
    if k is None or Sk is None:
        raise ConsistencyError("rhs_F needs k and Sk")
    a = assemble(gm, k, Sk, w)
    R = a.Tp + a.gp + w * (a.u @ np.conj(gm.m))
    F = gm.m + (Sk - a.Su) - a.Gu + w * (a.p @ gm.m) + w * (R @ a.ch_inv_u)
    if symmetric:
        F = 0.5 * (F + K.transpose(F))
    return F, a


def newnls_residual_kernel(gm, a, w, Tp=None):
    """LHS - RHS of the kernel equation, per node."""
    Tp = a.Tp if Tp is None else Tp
    lhs = a.Su + a.Gu - gm.m - w * (a.p @ gm.m)
    R = Tp + a.gp + w * (a.u @ np.conj(gm.m))
    ch_inv_u = a.ch_inv_u
    return lhs - w * (R @ ch_inv_u)


def transport_fd(grid, p, dt):
    """Tp = i p_t - Lap_x p + Lap_y p with i p_t from time differences."""
    D = grid.laplacian_matrix()
    return 1j * time_derivative(p, dt) - D @ p + p @ D


# ---------------------------------------------------------------- Picard


@dataclass
class PairTrajectory:
    t: np.ndarray
    k: np.ndarray
    Sk: np.ndarray
    assembly: Assembly
    history: list  # N-norm of successive differences
    iterations: int
    converged: bool

    @property
    def u(self):
        return self.assembly.u

    @property
    def p(self):
        return self.assembly.p

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])


def n_norm(k, Sk, w):
    """sup_t ||k||_{L2} + sup_t ||Sk||_{L2}."""
    return float(np.max(K.hs_norm(k, w)) + np.max(K.hs_norm(Sk, w)))


def picard_solve(grid, t, gm, tol=1e-10, max_iter=40, callback=None):
    """Iterate k^{n+1} = Duhamel(F(k^n)) from k^0 = Duhamel(m)."""
    w = grid.weight
    dt = float(t[1] - t[0])
    k, Sk = duhamel_solve_S(grid, gm.m, dt)
    k = 0.5 * (k + K.transpose(k))
    history = []
    a = None
    for it in range(1, max_iter + 1):
        F, a = rhs_F(gm, k, Sk, w)
        if callback is not None:
            callback(it - 1, k, Sk, a)
        k_new, Sk_new = duhamel_solve_S(grid, F, dt)
        k_new = 0.5 * (k_new + K.transpose(k_new))
        if not (np.all(np.isfinite(k_new)) and np.all(np.isfinite(Sk_new))):
            raise DivergenceError(f"non-finite kernel at Picard iterate {it}")
        diff = n_norm(k_new - k, Sk_new - Sk, w)
        history.append(diff)
        log.debug("picard iterate %d: N(diff) = %.3e", it, diff)
        k, Sk = k_new, Sk_new
        if diff < tol * max(1.0, n_norm(k, Sk, w)):
            a = assemble(gm, k, Sk, w)
            if callback is not None:
                callback(it, k, Sk, a)
            return PairTrajectory(np.asarray(t), k, Sk, a, history, it, True)
    if len(history) >= 2 and history[-1] >= history[-2]:
        raise NonContractionError(
            f"no contraction after {max_iter} iterates: N(diff) {history[-2]:.3e} -> {history[-1]:.3e}"
        )
    log.warning("Picard stopped at max_iter=%d with N(diff)=%.3e", max_iter, history[-1])
    return PairTrajectory(np.asarray(t), k, Sk, assemble(gm, k, Sk, w), history, max_iter, False)


def residual_newnls(grid, pair, gm, transport="fd"):
    """Per-node L2 norm of the kernel-equation residual.

    transport="fd" takes i p_t from centred differences of the stored p;
    transport="series" uses the Leibniz value built from Sk.
    """
    w = grid.weight
    a = pair.assembly
    Tp = transport_fd(grid, a.p, pair.dt) if transport == "fd" else None
    return K.hs_norm(newnls_residual_kernel(gm, a, w, Tp), w)


def instantaneous_Sk(gm, k, w):
    """Sk at a single instant such that the kernel-equation residual vanishes.

    The residual is real-affine in Sk (Leibniz terms carry conj(Sk)), so it
    is solved exactly by least squares over symmetric Sk.
    """
    n = k.shape[-1]
    iu = np.triu_indices(n)
    basis = []
    for i, j in zip(*iu):
        for z in (1.0, 1j):
            E = np.zeros((n, n), dtype=complex)
            E[i, j] = E[j, i] = z
            basis.append(E)

    def resid(S):
        return newnls_residual_kernel(gm, assemble(gm, k, S, w), w)

    r0 = resid(np.zeros((n, n), dtype=complex))
    cols = [(resid(E) - r0).ravel() for E in basis]
    Amat = np.array(cols).T
    Areal = np.vstack([Amat.real, Amat.imag])
    b = -np.concatenate([r0.ravel().real, r0.ravel().imag])
    x, *_ = np.linalg.lstsq(Areal, b, rcond=None)
    S = sum(c * E for c, E in zip(x, basis))
    return S, float(np.max(np.abs(resid(S))))
