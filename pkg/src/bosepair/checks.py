"""Oracle-backed checks: error-norm calibration, the vacuum vector identity,
the end-to-end derivative identity and the l2 estimate along a trajectory."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import expm_multiply

from . import error_norms as E
from . import fock as F
from . import grid as G
from . import hartree as H
from . import kernels as K
from . import pair_kernel as P
from . import reduction as R
from .errors import VerificationError

CALIBRATION_SEEDS = tuple(range(6))
CHECK_SEEDS = (101, 102, 103)


def random_instance(seed, M_f=2, L=2.0, k_scale=0.2, v_range=(0.1, 0.5)):
    """Random normalized phi, symmetric k with ||k|| = k_scale and an even potential."""
    rng = np.random.default_rng(seed)
    grid = G.GridSpec(1, M_f, L)
    w = grid.weight
    phi = rng.normal(size=M_f) + 1j * rng.normal(size=M_f)
    phi = phi / np.sqrt(w * np.sum(np.abs(phi) ** 2))
    k = rng.normal(size=(M_f, M_f)) + 1j * rng.normal(size=(M_f, M_f))
    k = k + k.T
    k = k * (k_scale / K.hs_norm(k, w))
    v = G.symmetrize_even(grid, rng.uniform(*v_range, size=M_f))
    return grid, phi, k, v


# ------------------------------------------------------------------ calibration


def _slot_system(space, terms, w):
    """Per slot: (term names, amplitude columns) with unit constants."""
    out = {}
    for name in sorted(terms):
        slot, raw = terms[name]
        amps = E.slot_amplitudes(space, E.FockSlotPayload(slot, np.asarray(raw), {}), w)
        names, cols = out.setdefault(slot, ([], []))
        names.append(name)
        cols.append(amps)
    return out


def oracle_instance(seed, n_max=40, **kw):
    grid, phi, k, v = random_instance(seed, **kw)
    u, p = K.sh_ch_series(k, grid.weight)
    space, gvec, fvec = F.conjugated_error_states(grid, phi, k, v, n_max=n_max)
    return dict(grid=grid, phi=phi, k=k, v=v, u=u, p=p, space=space, gvec=gvec, fvec=fvec)


def calibrate(seeds=CALIBRATION_SEEDS, n_max=40):
    """Least-squares fit of the term weights against exact oracle amplitudes.

    Each slot gives a real linear system (one column per term); the fitted
    weights reproduce the oracle vectors to round-off.
    """
    systems = {}
    for seed in seeds:
        inst = oracle_instance(seed, n_max)
        grid, space = inst["grid"], inst["space"]
        w = grid.weight
        fam = {
            "g": (E.g_terms(grid, inst["u"], inst["p"], inst["v"]), inst["gvec"]),
            "f": (E.f_terms(grid, inst["u"], inst["p"], inst["phi"], inst["v"]), inst["fvec"]),
        }
        for tag, (terms, vec) in fam.items():
            for slot, (names, cols) in _slot_system(space, terms, w).items():
                key = (tag, slot, tuple(names))
                systems.setdefault(key, []).append((np.array(cols).T, vec[space.sector == slot]))
    entries = []
    for (tag, slot, names), rows in systems.items():
        A = np.vstack([a for a, _ in rows])
        b = np.concatenate([t for _, t in rows])
        Ar = np.vstack([A.real, A.imag])
        br = np.concatenate([b.real, b.imag])
        x, _, rank, _ = np.linalg.lstsq(Ar, br, rcond=None)
        resid = float(np.max(np.abs(Ar @ x - br), initial=0.0))
        if rank < len(names):
            raise VerificationError(f"calibration system for {tag} slot {slot} is rank deficient")
        for name, c in zip(names, x):
            entries.append({"name": name, "value": float(c), "family": tag, "slot": slot, "residual": resid})
    return sorted(entries, key=lambda e: (e["family"], e["slot"], e["name"]))


def constants_document(entries, seeds=CALIBRATION_SEEDS, n_max=40):
    return {
        "version": 1,
        "format": "constants: list of {name, value, family, slot, residual}; value is the real weight "
        "multiplying the raw symmetrized payload of that term",
        "lattice": {"M_f": 2, "L": 2.0, "dim": 1, "n_max": n_max, "seeds": list(seeds), "k_norm": 0.2},
        "notes": [
            "six1 and six2 are fitted as two independent weights; both come out equal to 1/2",
            "1two22 and 1two2 fit to zero: exact Wick ordering produces no diagonal-collapse payload",
        ],
        "constants": entries,
    }


def constants_drift(entries, reference):
    """Max |fitted - stored| over names present in either set."""
    fitted = {e["name"]: e["value"] for e in entries}
    names = set(fitted) | set(reference)
    return max(abs(fitted.get(n, 0.0) - reference.get(n, 0.0)) for n in names)


# ------------------------------------------------------------------ error norms vs oracle


def populated_slots(space, vec, rel=1e-8):
    """Sectors carrying more than rel * ||vec||, away from the truncation edge.

    Exponential actions leave noise of order 1e-11 * ||vec|| in every sector.
    """
    top = space.n_max - 2 * F.CLIP_MARGIN
    norms = space.sector_norms(vec)[: top + 1]
    scale = max(np.linalg.norm(vec), 1e-300)
    return sorted(int(n) for n in np.flatnonzero(norms > rel * scale))


def off_slot_norm(space, vec, slots):
    top = space.n_max - 2 * F.CLIP_MARGIN
    norms = space.sector_norms(vec)[: top + 1].copy()
    norms[list(slots)] = 0.0
    return float(np.max(norms))


def error_oracle_check(seeds=CHECK_SEEDS, constants=None, n_max=40):
    """Calibrated g/f against exact oracle norms on fresh random instances."""
    constants = E.load_constants()[0] if constants is None else constants
    rows = []
    for seed in seeds:
        inst = oracle_instance(seed, n_max)
        grid = inst["grid"]
        g_val, _ = E.g_error(grid, inst["u"], inst["p"], inst["v"], constants)
        f_val, _ = E.f_error(grid, inst["u"], inst["p"], inst["phi"], inst["v"], constants)
        g_or = float(np.linalg.norm(inst["gvec"]))
        f_or = float(np.linalg.norm(inst["fvec"]))
        rows.append({
            "seed": seed,
            "g_error": g_val,
            "g_oracle": g_or,
            "f_error": f_val,
            "f_oracle": f_or,
            "g_dev": abs(g_val - g_or),
            "f_dev": abs(f_val - f_or),
            "g_slots": populated_slots(inst["space"], inst["gvec"]),
            "f_slots": populated_slots(inst["space"], inst["fvec"]),
            "g_off_slot": off_slot_norm(inst["space"], inst["gvec"], E.G_SLOTS),
            "f_off_slot": off_slot_norm(inst["space"], inst["fvec"], E.F_SLOTS),
        })
    return rows


# ------------------------------------------------------------------ vacuum identity


def vector_identity_check(seed=0, N=4.0, n_max=48, **kw):
    """Ltilde Omega against (N^{-1/2} e^B[A,V]e^{-B} + N^{-1} e^B V e^{-B}) Omega.

    phi_t comes from the Hartree equation and Sk from an exact solve of the
    kernel equation at this instant, so L from the definition of Psi is the
    reduced generator.  The large n_max only absorbs truncation of e^{+-B}.
    """
    grid, phi, k, v = random_instance(seed, **kw)
    w = grid.weight
    gm = P.build_g_m(grid, phi, v)
    Sk, kernel_res = P.instantaneous_Sk(gm, k, w)
    a = P.assemble(gm, k, Sk, w)
    d, c1, im = R.d_and_chi1(gm, a, w)
    ast = R.astar_kernel(gm, a, w)
    D = grid.laplacian_matrix()
    phi_t = H.hartree_rhs(grid, phi, v)
    k_t = -1j * (Sk + D @ k + k @ D)
    hres = 1j * phi_t + G.laplacian(grid, phi) + gm.conv * phi
    c0 = float(R.chi0(grid, phi, v))

    space, gvec, fvec = F.conjugated_error_states(grid, phi, k, v, n_max=n_max)
    om = space.vacuum()
    exact = F.exact_generator_apply(space, grid, phi, phi_t, k, k_t, v, N, om)
    lt_exact = exact + (N * c0 + c1) * om
    lt_asm = F.assembled_generator_apply(space, grid, phi, v, N, gm, k, d, ast, hres, c0, c1, om)
    lt_asm = lt_asm + (N * c0 + c1) * om
    target = fvec / np.sqrt(N) + gvec / N
    return {
        "seed": seed,
        "N": N,
        "n_max": n_max,
        "deviation": float(np.linalg.norm(lt_exact - target)),
        "assembled_deviation": float(np.linalg.norm(lt_asm - target)),
        "norm_Ltilde_Omega": float(np.linalg.norm(lt_exact)),
        "norm_bound": float(np.linalg.norm(fvec) / np.sqrt(N) + np.linalg.norm(gvec) / N),
        "kernel_residual": kernel_res,
        "hartree_residual": float(np.max(np.abs(hres))),
        "astar_max": float(np.max(np.abs(ast))),
        "trace_d_imag": float(im),
    }


# ------------------------------------------------------------------ end to end


@dataclass
class EndToEndReport:
    t: np.ndarray
    nodes: np.ndarray
    derivative_dev: np.ndarray  # reduced generator, no obstruction terms
    derivative_dev_obstructed: np.ndarray  # with the obstruction terms
    obstruction_norm: np.ndarray
    lhs: np.ndarray  # per sampled node, |e^{-i theta} Omega - Psi|
    lhs_direct: np.ndarray
    rhs: np.ndarray
    ltilde_norm: np.ndarray
    ltilde_bound: np.ndarray
    trace_imag_rel: float
    n_max: int
    n_work: int
    strict_derivative_dev: float | None
    runtime: float
    extras: dict = field(default_factory=dict)

    @property
    def margins(self):
        return self.rhs - self.lhs

    def passed(self, deriv_tol=1e-6, slack=0.05, trace_tol=1e-6, atol=1e-12):
        """atol is the round-off floor of the exponential actions (matters only where rhs = 0)."""
        return bool(
            np.max(self.derivative_dev, initial=0.0) < deriv_tol
            and np.all(self.lhs <= self.rhs * (1 + slack) + atol)
            and self.trace_imag_rel < trace_tol
        )

    def summary(self):
        return {
            "derivative_dev_max": float(np.max(self.derivative_dev, initial=0.0)),
            "derivative_dev_obstructed_max": float(np.max(self.derivative_dev_obstructed, initial=0.0)),
            "obstruction_norm_max": float(np.max(self.obstruction_norm, initial=0.0)),
            "strict_truncation_derivative_dev": self.strict_derivative_dev,
            "lhs_max": float(np.max(self.lhs)),
            "rhs_max": float(np.max(self.rhs)),
            "min_margin": float(np.min(self.margins)),
            "min_ratio_margin": float(np.min(self.rhs * 1.05 - self.lhs)),
            "ltilde_within_bound": bool(np.all(self.ltilde_norm <= self.ltilde_bound * (1 + 1e-8) + 1e-14)),
            "trace_imag_rel": self.trace_imag_rel,
            "n_max": self.n_max,
            "n_work": self.n_work,
            "runtime_s": self.runtime,
        }


class _PsiTrajectory:
    """Psi(t_j) = e^{B_j} e^{sqrt(N) A_j} e^{i t_j H_N} e^{-sqrt(N) A_0} Omega on one space."""

    def __init__(self, space, grid, t, phi, k, v, N):
        self.space, self.grid, self.t, self.phi, self.k = space, grid, t, phi, k
        self.N = N
        w = grid.weight
        self.H_N = (F.kinetic(space, grid) + F.interaction(space, grid, v) / N).tocsr()
        A0 = F.coherent_generator(space, phi[0], w)
        self.psi0 = expm_multiply(-np.sqrt(N) * A0, space.vacuum())
        self._cache = {}

    def evolved(self, j):
        return expm_multiply(1j * self.t[j] * self.H_N, self.psi0)

    def __call__(self, j):
        if j not in self._cache:
            w = self.grid.weight
            if self.t[j] == 0:
                # e^{sqrt(N) A_0} cancels e^{-sqrt(N) A_0} exactly
                x = self.space.vacuum()
                self._cache[j] = expm_multiply(F.pair_generator(self.space, self.k[j], w), x)
                return self._cache[j]
            x = self.evolved(j)
            x = expm_multiply(np.sqrt(self.N) * F.coherent_generator(self.space, self.phi[j], w), x)
            self._cache[j] = expm_multiply(F.pair_generator(self.space, self.k[j], w), x)
        return self._cache[j]


def richardson(fun, j, dt):
    """(4 D(dt) - D(2dt)) / 3 with centred differences; fourth order."""
    d1 = (fun(j + 1) - fun(j - 1)) / (2 * dt)
    d2 = (fun(j + 2) - fun(j - 2)) / (4 * dt)
    return (4 * d1 - d2) / 3


def sample_nodes(nt, stride):
    nodes = list(range(2, nt - 2, stride))
    if nodes[-1] != nt - 3:
        nodes.append(nt - 3)
    return np.array(nodes)


def _derivative_devs(space, grid, v, N, tr, pair, gm, psi, nodes, keep):
    w = grid.weight
    dt = float(tr.t[1] - tr.t[0])
    D = grid.laplacian_matrix()
    plain, obst, obn = [], [], []
    for j in nodes:
        dpsi = richardson(psi, j, dt) / 1j
        ps = psi(j)
        gmj = gm.node(j)
        a = pair.assembly
        aj = P.Assembly(*(getattr(a, f)[j] for f in a.__dataclass_fields__))
        d, c1, _ = R.d_and_chi1(gmj, aj, w)
        c0 = float(R.chi0(grid, tr.phi[j], v))
        zero = np.zeros_like(d)
        Lps = F.assembled_generator_apply(space, grid, tr.phi[j], v, N, gmj, aj.k, d, zero, zero[0],
                                          c0, c1, ps, obstructions=False)
        plain.append(np.linalg.norm((dpsi - Lps)[keep]))
        # same generator plus obstructions, with phi_t and k_t read off the trajectory
        phi_t = richardson(lambda i: tr.phi[i], j, dt)
        k_t = richardson(lambda i: pair.k[i], j, dt)
        Sk = 1j * k_t - D @ aj.k - aj.k @ D
        af = P.assemble(gmj, aj.k, Sk, w)
        df, c1f, _ = R.d_and_chi1(gmj, af, w)
        ast = R.astar_kernel(gmj, af, w)
        hres = 1j * phi_t + G.laplacian(grid, tr.phi[j]) + gmj.conv * tr.phi[j]
        Lfull = F.assembled_generator_apply(space, grid, tr.phi[j], v, N, gmj, aj.k, df, ast, hres,
                                            c0, c1f, ps)
        Lbare = F.assembled_generator_apply(space, grid, tr.phi[j], v, N, gmj, aj.k, df, ast, hres,
                                            c0, c1f, ps, obstructions=False)
        obst.append(np.linalg.norm((dpsi - Lfull)[keep]))
        obn.append(np.linalg.norm((Lfull - Lbare)[keep]))
    return np.array(plain), np.array(obst), np.array(obn)


def end_to_end_check(grid, v, tr, pair, gm, diag, f, g, N=1.0, n_max=10, headroom=None, stride=25,
                     strict=True):
    """Derivative identity, Ltilde Omega bound and the l2 estimate along a trajectory.

    Psi is propagated on a working space large enough that truncation of
    e^{sqrt(N) A} and e^B is invisible (Poisson cutoff plus headroom), and
    derivative residuals are restricted to sectors <= n_max.  Norms in the
    l2 estimate are taken on the whole working space (they are unitary
    invariants; a projection would not be).
    """
    t0 = time.perf_counter()
    w = grid.weight
    t = tr.t
    n_work = max(n_max + (10 if headroom is None else headroom), F.poisson_cutoff(N) + 6)
    space = F.FockSpace(grid.n, n_work)
    keep = space.sector <= n_max
    psi = _PsiTrajectory(space, grid, t, tr.phi, pair.k, v, N)
    nodes = sample_nodes(len(t), stride)
    dev, dev_ob, obn = _derivative_devs(space, grid, v, N, tr, pair, gm, psi, nodes, keep)

    strict_dev = None
    if strict:
        small = F.FockSpace(grid.n, n_max)
        psi_s = _PsiTrajectory(small, grid, t, tr.phi, pair.k, v, N)
        every = np.ones(small.dim, dtype=bool)
        strict_dev = float(np.max(_derivative_devs(small, grid, v, N, tr, pair, gm, psi_s,
                                                   nodes[:3], every)[0]))

    theta = diag.phase_integral(N)
    bound = E.error_bound(t, f, g, N)
    l2_nodes = np.unique(np.concatenate([[0], nodes, [len(t) - 1]]))
    om = space.vacuum()
    lhs, lhs_direct, lt_norm, lt_bound = [], [], [], []
    for j in l2_nodes:
        ps = psi(j)
        lhs.append(np.linalg.norm(np.exp(-1j * theta[j]) * om - ps))
        # e^{-sqrt(N) A} e^{-B} e^{-i theta} Omega - e^{i t H_N} Psi_0
        x = expm_multiply(-F.pair_generator(space, pair.k[j], w), np.exp(-1j * theta[j]) * om)
        x = expm_multiply(-np.sqrt(N) * F.coherent_generator(space, tr.phi[j], w), x)
        lhs_direct.append(np.linalg.norm(x - psi.evolved(j)))
        gmj = gm.node(j)
        aj = P.Assembly(*(getattr(pair.assembly, f_)[j] for f_ in pair.assembly.__dataclass_fields__))
        d, c1, _ = R.d_and_chi1(gmj, aj, w)
        zero = np.zeros_like(d)
        c0 = float(diag.chi0[j])
        lt = F.assembled_generator_apply(space, grid, tr.phi[j], v, N, gmj, aj.k, d, zero, zero[0],
                                         c0, c1, om, obstructions=False) + (N * c0 + c1) * om
        lt_norm.append(np.linalg.norm(lt))
        lt_bound.append(f[j] / np.sqrt(N) + g[j] / N)

    im_max = float(np.max(np.abs(diag.trace_d_imag)))
    re_max = float(np.max(2 * np.abs(diag.chi1)))
    trace_rel = im_max / re_max if re_max > 0 else im_max
    return EndToEndReport(
        t=t,
        nodes=l2_nodes,
        derivative_dev=dev,
        derivative_dev_obstructed=dev_ob,
        obstruction_norm=obn,
        lhs=np.array(lhs),
        lhs_direct=np.array(lhs_direct),
        rhs=bound[l2_nodes],
        ltilde_norm=np.array(lt_norm),
        ltilde_bound=np.array(lt_bound),
        trace_imag_rel=trace_rel,
        n_max=n_max,
        n_work=n_work,
        strict_derivative_dev=strict_dev,
        runtime=time.perf_counter() - t0,
        extras={"derivative_nodes": nodes},
    )


# ------------------------------------------------------------------ scaling


def kernel_scaling(grid, v_unit, phi0, dt, n_steps, eps_values, tol=1e-10):
    """sup_t ||k|| / eps for each coupling eps (v = eps * v_unit)."""
    out = []
    for eps in eps_values:
        v = eps * v_unit
        tr = H.hartree_evolve(grid, phi0, v, dt, n_steps)
        gm = P.build_g_m(grid, tr.phi, v)
        pair = P.picard_solve(grid, tr.t, gm, tol=tol)
        out.append(float(np.max(K.hs_norm(pair.k, grid.weight))) / eps)
    ratios = np.array(out)
    return ratios, float(ratios.max() / ratios.min() - 1.0)


def bound_scaling(t, f, g, N_values=(1.0, 4.0, 16.0)):
    """sqrt(N) * bound(T) is affine in N^{-1/2}; its intercept is int f.

    Returns (intercept relative error, sqrt(N)*bound values).
    """
    Fi = float(E.error_bound(t, f, np.zeros_like(g), 1.0)[-1])
    scaled = np.array([np.sqrt(N) * E.error_bound(t, f, g, N)[-1] for N in N_values])
    x = 1 / np.sqrt(np.asarray(N_values))
    slope, intercept = np.polyfit(x, scaled, 1)
    rel = abs(intercept - Fi) / max(abs(Fi), 1e-300)
    return float(rel), scaled, float(slope)
