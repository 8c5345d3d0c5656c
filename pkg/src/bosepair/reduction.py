"""Quadratic-reduction diagnostics: the a*a* obstruction, the d kernel, chi0, chi1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import grid as G
from . import kernels as K
from .pair_kernel import transport_fd

TRACE_IMAG_TOL = 1e-6


def chi0(grid, phi, v):
    """1/2 int int v(x-y) |phi(x)|^2 |phi(y)|^2, batched over leading axes."""
    rho = np.abs(np.asarray(phi)) ** 2
    conv = np.real(G.convolve(grid, v, rho))
    return 0.5 * grid.weight * np.sum(conv * rho, axis=-1)


def _transport(grid, a, dt, transport):
    if transport == "series":
        return a.Tp
    if transport == "fd":
        return transport_fd(grid, a.p, dt)
    raise ValueError(f"unknown transport {transport!r}")


def d_kernel(gm, a, w, Tp=None):
    """Coefficient of -(a_x a*_y + a*_y a_x)/2 in the reduced generator.

    Every term carries u, p or Tp, so no bare delta ever reaches a trace.
    """
    Tp = a.Tp if Tp is None else Tp
    ub = np.conj(a.u)
    mb = np.conj(gm.m)
    X = Tp + a.gp
    return (
        w * ((a.Su + a.Gu) @ ub)
        - (X + w * (X @ a.p))
        - (w * (a.u @ mb) + w * w * (a.u @ mb @ a.p))
        - (w * (gm.m @ ub) + w * w * (a.p @ gm.m @ ub))
    )


def d_and_chi1(gm, a, w, Tp=None):
    """d and chi1 = +1/2 Re tr d.

    With this sign the generator reads L = Ltilde - N chi0 - chi1 with a
    normal-ordered Ltilde (normal ordering the d term leaves -1/2 tr d).
    """
    d = d_kernel(gm, a, w, Tp)
    tr = K.trace_diag(d, w)
    return d, 0.5 * np.real(tr), np.imag(tr)


def astar_kernel(gm, a, w, Tp=None):
    """Coefficient of a*_x a*_y (up to the factor -1/2); zero at exact solutions."""
    Tp = a.Tp if Tp is None else Tp
    pb = np.conj(a.p)
    mb = np.conj(gm.m)
    X = Tp + a.gp
    SG = a.Su + a.Gu
    return (
        SG + w * (SG @ pb)
        - w * (X @ a.u)
        - w * w * (a.u @ mb @ a.u)
        - (gm.m + w * (a.p @ gm.m) + w * (gm.m @ pb) + w * w * (a.p @ gm.m @ pb))
    )


def astar_coeff_norm(gm, a, w, Tp=None):
    return K.hs_norm(astar_kernel(gm, a, w, Tp), w)


def phase_integral(t, chi0_series, chi1_series, N):
    return cumulative_trapezoid(N * np.asarray(chi0_series) + np.asarray(chi1_series), t, initial=0.0)


@dataclass
class DiagnosticsSeries:
    t: np.ndarray
    chi0: np.ndarray
    chi1: np.ndarray
    trace_d_imag: np.ndarray
    astar_norm: np.ndarray
    residual: np.ndarray
    d_hermitian_defect: np.ndarray
    f_err: np.ndarray | None = None
    g_err: np.ndarray | None = None

    def phase_integral(self, N):
        return phase_integral(self.t, self.chi0, self.chi1, N)

    def trace_imag_ok(self, tol=TRACE_IMAG_TOL):
        trace_re = 2 * np.abs(self.chi1)
        return bool(np.all(np.abs(self.trace_d_imag) <= tol * (1 + trace_re)))


def diagnostics(grid, phi, v, pair, gm, d_transport="series", astar_transport="fd"):
    from .pair_kernel import residual_newnls

    w = grid.weight
    a = pair.assembly
    d, c1, im = d_and_chi1(gm, a, w, _transport(grid, a, pair.dt, d_transport))
    dn = K.hs_norm(d, w)
    herm = K.hs_norm(d - K.adjoint(d), w) / np.where(dn > 0, dn, 1.0)
    ast = astar_coeff_norm(gm, a, w, _transport(grid, a, pair.dt, astar_transport))
    return DiagnosticsSeries(
        t=np.asarray(pair.t),
        chi0=chi0(grid, phi, v),
        chi1=c1,
        trace_d_imag=im,
        astar_norm=ast,
        residual=residual_newnls(grid, pair, gm, astar_transport),
        d_hermitian_defect=herm,
    )
