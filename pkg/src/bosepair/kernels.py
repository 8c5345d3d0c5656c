"""Two-point kernels on the grid.

A kernel is a complex array whose last two axes are indexed by grid points
(x, y); leading axes (usually time) are batched.  Composition carries the
volume weight ``w = h**dim``:

    (A o B)(x, y) = w * sum_z A(x, z) B(z, y)

so the discrete delta is ``I / w``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, NonConvergenceError, PositivityError, ConsistencyError

SYMMETRY_TOL = 1e-13


def _check_pair(A, B):
    if A.shape[-1] != B.shape[-2]:
        raise DimensionError(f"cannot compose kernels of shapes {A.shape} and {B.shape}")


def compose(A, B, w):
    A = np.asarray(A)
    B = np.asarray(B)
    _check_pair(A, B)
    return w * (A @ B)


def transpose(A):
    return np.swapaxes(A, -1, -2)


def adjoint(A):
    return np.conj(np.swapaxes(A, -1, -2))


def involution(A, which):
    if which == "transpose":
        return transpose(A)
    if which == "conj":
        return np.conj(A)
    if which == "adjoint":
        return adjoint(A)
    raise ValueError(f"unknown involution {which!r}")


def delta(n, w):
    return np.eye(n) / w


def enforce(A, tag, tol=SYMMETRY_TOL):
    """Symmetrize A according to tag, refusing inputs that drift too far."""
    A = np.asarray(A)
    if tag == "general":
        return A
    mirror = transpose(A) if tag == "symmetric" else adjoint(A)
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    drift = float(np.max(np.abs(A - mirror), initial=0.0))
    if drift > tol * scale:
        raise ConsistencyError(f"{tag} kernel drifts by {drift:.3e}")
    return 0.5 * (A + mirror)


def hs_norm(A, w):
    """L^2(dx dy) norm, batched over leading axes."""
    return w * np.sqrt(np.sum(np.abs(A) ** 2, axis=(-2, -1)))


def trace_diag(A, w):
    return w * np.trace(A, axis1=-2, axis2=-1)


def _batch_norm(A, w):
    return float(np.max(hs_norm(A, w), initial=0.0))


def sh_ch_series(k, w, tail_tol=1e-15, max_terms=25):
    """u = sh(k) and p = ch(k) - 1 by their power series in k o conj(k)."""
    u, p, _, _ = sh_ch_transport(k, None, w, tail_tol, max_terms)
    return u, p


def sh_ch_transport(k, Sk, w, tail_tol=1e-15, max_terms=25):
    """Series for u, p together with Su and Tp obtained from Sk by Leibniz.

    S = i d/dt - Lap_x - Lap_y and T = i d/dt - Lap_x + Lap_y.  On an
    alternating word k kbar k ... the interior Laplacians cancel in pairs,
    so S (resp. T) acts as a derivation that sends k -> Sk and
    kbar -> -conj(Sk).  No time differencing is involved.
    """
    k = np.asarray(k, dtype=complex)
    kb = np.conj(k)
    transport = Sk is not None
    if transport:
        Sk = np.asarray(Sk, dtype=complex)
        dkb = -np.conj(Sk)
    X = w * (k @ kb)
    dX = w * (Sk @ kb + k @ dkb) if transport else None

    u = k.copy()
    p = np.zeros_like(k)
    Su = Sk.copy() if transport else None
    Tp = np.zeros_like(k) if transport else None
    P, dP = None, None  # (k kbar)^n and its derivative
    fact_even, fact_odd = 1.0, 1.0
    for n in range(1, max_terms + 1):
        if P is None:
            P, dP = X, dX
        else:
            P_new = w * (P @ X)
            if transport:
                dP = w * (dP @ X + P @ dX)
            P = P_new
        fact_even *= (2 * n - 1) * (2 * n)
        fact_odd *= (2 * n) * (2 * n + 1)
        term_p = P / fact_even
        term_u = w * (P @ k) / fact_odd
        p = p + term_p
        u = u + term_u
        if transport:
            Tp = Tp + dP / fact_even
            Su = Su + w * (dP @ k + P @ Sk) / fact_odd
        tail = max(_batch_norm(term_p, w), _batch_norm(term_u, w))
        if not np.isfinite(tail):
            break
        if tail < tail_tol * max(1.0, _batch_norm(p, w), _batch_norm(u, w)):
            u = 0.5 * (u + transpose(u))
            p = 0.5 * (p + adjoint(p))
            return u, p, Su, Tp
    raise NonConvergenceError(f"sh/ch series did not converge in {max_terms} terms")


def exp_block_oracle(k, w):
    """(ch, sh) from the dense exponential of [[0, k], [kbar, 0]] (weights folded in)."""
    k = np.asarray(k, dtype=complex)
    n = k.shape[-1]
    K = np.zeros((2 * n, 2 * n), dtype=complex)
    K[:n, n:] = w * k
    K[n:, :n] = w * np.conj(k)
    E = sla.expm(K)
    return E[:n, :n] / w, E[:n, n:] / w


def solve_one_plus_p(p, rhs, w):
    """X with (delta + p) o X = rhs; 1 + p must be positive definite."""
    p = np.asarray(p)
    n = p.shape[-1]
    A = np.eye(n) + w * p
    A = 0.5 * (A + adjoint(A))
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise PositivityError("1 + p is not positive definite") from exc
    return np.linalg.solve(A, rhs)


@dataclass(frozen=True)
class BlockMatrix:
    """S(d, k, l) = [[d, k], [l, -d^T]] of the symplectic Lie algebra."""

    d: np.ndarray
    k: np.ndarray
    l: np.ndarray

    def dense(self):
        return np.block([[self.d, self.k], [self.l, -self.d.T]])

    def in_sp(self, tol=1e-12):
        return bool(np.allclose(self.k, self.k.T, atol=tol) and np.allclose(self.l, self.l.T, atol=tol))
