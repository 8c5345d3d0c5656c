"""Fock-space payloads of e^B V e^{-B} Omega and e^B [A, V] e^{-B} Omega.

Conjugation by e^B sends
    a*_x -> b*_x = a*(c_x) + a(u_x),     a_x -> b_x = a(cbar_x) + a*(ubar_x),
with u = sh(k), c = ch(k) = delta + p.  Wick's theorem then writes each
state as a sum over partial contractions; a contraction of an earlier
factor i with a later factor j is the integral of the annihilation
coefficient of i against the creation coefficient of j.

Each term below is a symmetrized "raw" payload psi(z_1..z_n) in continuum
normalization.  Its weight (the symmetrization and normalization factor)
is a calibrated constant read from data/error_constants.json.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources
from math import factorial

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import grid as G
from .errors import ConfigurationError

SLOT4_MAX_POINTS = 16

G_SLOTS = (0, 2, 4)
F_SLOTS = (1, 3)


@dataclass
class FockSlotPayload:
    slot: int
    payload: np.ndarray  # scalar, vector, matrix or rank-3/4 tensor
    terms: dict  # term name -> weighted contribution norm

    def norm(self, w):
        return float(np.sqrt(w**self.slot * np.sum(np.abs(self.payload) ** 2)))


def symmetrize(T):
    T = np.asarray(T)
    if T.ndim < 2:
        return T
    perms = list(itertools.permutations(range(T.ndim)))
    return sum(np.transpose(T, p) for p in perms) / len(perms)


def _contractions(u, p, w):
    n = u.shape[-1]
    U, P = np.asarray(u), np.asarray(p)
    Ub, Pb = np.conj(U), np.conj(P)
    C = np.eye(n) / w + P
    uub = w * (U @ Ub)  # (u o ubar), also equal to 2p + p o p
    return {
        "C": C,
        "Ub": Ub,
        "X12": U + w * (U @ Pb),  # (u o cbar)(x0, y0)
        "Xdiag": np.real_if_close(np.diag(uub)),  # (u o ubar)(x0, x0)
        "X14": uub,  # (u o ubar)(x0, y0)
        "X34": Ub + w * (Pb @ Ub),  # (cbar o ubar)(x0, y0)
    }


def g_terms(grid, u, p, v, slot4=True):
    """Raw payloads of the conjugated quartic acting on the vacuum."""
    w = grid.weight
    Vm = G.pair_matrix(grid, v)
    X = _contractions(u, p, w)
    C, Ub = X["C"], X["Ub"]
    w2 = w * w
    terms = {
        # slot 0: full contractions (12)(34), (14)(23), (13)(24)
        "threee": (0, w2 * np.sum(Vm * X["X12"] * X["X34"])),
        "six1": (0, w2 * np.sum(Vm * X["X14"] * X["X14"].T)),
        "six2": (0, w2 * X["Xdiag"] @ Vm @ X["Xdiag"]),
        # slot 2: one contraction, two creation parts left
        "onee": (2, symmetrize(w2 * C.T @ (Vm * X["X34"]) @ C)),
        "four1": (2, symmetrize(w2 * Ub.T @ (Vm * X["X12"]) @ Ub)),
        "four2_diag": (2, symmetrize(2 * w2 * C.T @ np.diag(Vm.T @ X["Xdiag"]) @ Ub)),
        "four2_off": (2, symmetrize(2 * w2 * C.T @ (Vm * X["X14"]).T @ Ub)),
    }
    if slot4:
        if grid.n > SLOT4_MAX_POINTS:
            raise ConfigurationError(f"slot-4 payloads limited to {SLOT4_MAX_POINTS} grid points")
        Y = np.einsum("ai,aj->aij", C, Ub)
        terms["twoo"] = (4, symmetrize(w2 * np.einsum("ab,aik,bjl->ijkl", Vm, Y, Y)))
    return terms


def f_terms(grid, u, p, phi, v, collapse=True):
    """Raw payloads of the conjugated cubic acting on the vacuum.

    The first family comes from phibar(y) a*_x a_x a_y, the mirror family
    from phi(y) a*_x a*_y a_x.  The two diagonal-collapse candidates are
    included only so the calibration can weigh them.
    """
    w = grid.weight
    Vm = G.pair_matrix(grid, v)
    X = _contractions(u, p, w)
    C, Ub = X["C"], X["Ub"]
    ph = np.asarray(phi)
    phb = np.conj(ph)
    w2 = w * w
    VX = Vm.T @ X["Xdiag"]
    terms = {
        "1one1": (1, w2 * (VX * phb) @ Ub),
        "1one2": (1, w2 * ((Vm * X["X14"]) @ phb) @ Ub),
        "1two1": (1, w2 * ((Vm * X["X34"]) @ phb) @ C),
        "mirror_one1": (1, w2 * ((Vm * X["X12"]) @ ph) @ Ub),
        "mirror_one2": (1, w2 * (VX * ph) @ C),
        "mirror_two1": (1, w2 * ((Vm * X["X14"].T) @ ph) @ C),
        "1three": (3, symmetrize(w2 * np.einsum("ab,ai,aj,bk,b->ijk", Vm, C, Ub, Ub, phb))),
        "mirror_three": (3, symmetrize(w2 * np.einsum("ab,ai,bj,ak,b->ijk", Vm, C, C, Ub, ph))),
    }
    if collapse:
        ud = np.diag(np.asarray(u))
        terms["1two22"] = (1, w2 * ((Vm.T @ ud) * phb) @ np.asarray(p))
        terms["1two2"] = (1, w * phb * (Vm.T @ ud))
    return terms


# ------------------------------------------------------------ split evaluation


def onee_split(grid, u, p, v):
    """The "onee" payload as psi_dd + psi_dp + psi_pd + psi_pp, deltas resolved by hand."""
    w = grid.weight
    Vm = G.pair_matrix(grid, v)
    X34 = _contractions(u, p, w)["X34"]
    P = np.asarray(p)
    VX = Vm * X34
    dd = VX
    dp = w * VX @ P
    pd = w * P.T @ VX
    pp = w * w * P.T @ VX @ P
    return {k: symmetrize(x) for k, x in {"dd": dd, "dp": dp, "pd": pd, "pp": pp}.items()}


# ------------------------------------------------------------ constants


def load_constants(path=None):
    if path is None:
        text = resources.files("bosepair").joinpath("data/error_constants.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    data = json.loads(text)
    return {c["name"]: c["value"] for c in data["constants"]}, data


def nominal_constants():
    """Combinatorial prefactors 1/2 (quartic) or 1 (cubic) times sqrt(n!)."""
    out = {}
    for name in ("threee", "six1", "six2"):
        out[name] = 0.5
    for name in ("onee", "four1", "four2_diag", "four2_off"):
        out[name] = 0.5 * np.sqrt(2.0)
    out["twoo"] = 0.5 * np.sqrt(24.0)
    for name in ("1one1", "1one2", "1two1", "mirror_one1", "mirror_one2", "mirror_two1"):
        out[name] = 1.0
    out["1three"] = out["mirror_three"] = np.sqrt(6.0)
    out["1two22"] = out["1two2"] = 0.0
    return out


def combine(terms, constants, w):
    slots = {}
    for name, (slot, raw) in terms.items():
        c = constants.get(name, 0.0)
        contrib = c * np.asarray(raw)
        if slot in slots:
            slots[slot].payload = slots[slot].payload + contrib
        else:
            slots[slot] = FockSlotPayload(slot, contrib, {})
        slots[slot].terms[name] = float(np.sqrt(w**slot * np.sum(np.abs(contrib) ** 2)))
    return [slots[s] for s in sorted(slots)]


def g_error(grid, u, p, v, constants=None):
    constants = load_constants()[0] if constants is None else constants
    comps = combine(g_terms(grid, u, p, v, slot4=grid.n <= SLOT4_MAX_POINTS), constants, grid.weight)
    return float(np.sqrt(sum(c.norm(grid.weight) ** 2 for c in comps))), comps


def f_error(grid, u, p, phi, v, constants=None):
    constants = load_constants()[0] if constants is None else constants
    comps = combine(f_terms(grid, u, p, phi, v), constants, grid.weight)
    return float(np.sqrt(sum(c.norm(grid.weight) ** 2 for c in comps))), comps


def error_series(grid, pair, phi, v, constants=None, slot4=None):
    """f(t) and g(t) along a trajectory."""
    constants = load_constants()[0] if constants is None else constants
    slot4 = grid.n <= SLOT4_MAX_POINTS if slot4 is None else slot4
    w = grid.weight
    nt = len(pair.t)
    f = np.zeros(nt)
    g = np.zeros(nt)
    for j in range(nt):
        u, p = pair.u[j], pair.p[j]
        gc = combine(g_terms(grid, u, p, v, slot4=slot4), constants, w)
        fc = combine(f_terms(grid, u, p, phi[j], v), constants, w)
        g[j] = np.sqrt(sum(c.norm(w) ** 2 for c in gc))
        f[j] = np.sqrt(sum(c.norm(w) ** 2 for c in fc))
    return f, g


def error_bound(t, f, g, N):
    if N < 1:
        raise ConfigurationError("particle number N must be >= 1")
    F = cumulative_trapezoid(f, t, initial=0.0)
    Gi = cumulative_trapezoid(g, t, initial=0.0)
    return F / np.sqrt(N) + Gi / N


def slot_amplitudes(space, payload, w):
    """Occupation amplitudes of a continuum slot payload on a lattice Fock space."""
    n = payload.slot
    T = w ** (n / 2) * payload.payload
    return space.tensor_to_amplitudes(T, n)


def factorial_norm(n):
    return np.sqrt(factorial(n))
