"""Exact truncated Fock-space oracle on a small periodic lattice.

Lattice ladder operators a_j obey [a_i, a_j^dag] = delta_ij.  Continuum
objects are mapped with a_x = a_j / sqrt(w), w = h**dim, so a kernel k(x, y)
enters operators as the lattice matrix w * k and a field phi as sqrt(w) * phi.

Truncation: states with total occupation above n_max are dropped.  A product
of r ladder operators is exact on sectors n <= n_max - r, which is where
identities are compared ("safe subspace").
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from . import grid as G
from .errors import ConfigurationError, TruncationError, VerificationError

MAX_DIM = 100_000
TAIL_THRESHOLD = 1e-8


def fock_dimension(M, n_max):
    return sum(comb(n + M - 1, M - 1) for n in range(n_max + 1))


class FockSpace:
    """Occupation-number basis with sum(n_j) <= n_max, ordered by sector."""

    def __init__(self, M, n_max, max_dim=MAX_DIM):
        if M < 1 or n_max < 0:
            raise ConfigurationError("need at least one mode and n_max >= 0")
        dim = fock_dimension(M, n_max)
        if dim > max_dim:
            raise ConfigurationError(f"Fock dimension {dim} exceeds the guard {max_dim}")
        self.M, self.n_max, self.dim = M, n_max, dim
        states = []
        for n in range(n_max + 1):
            for c in itertools.combinations_with_replacement(range(M), n):
                states.append(np.bincount(c, minlength=M) if n else np.zeros(M, int))
        self.states = np.array(states, dtype=int).reshape(dim, M)
        self.sector = self.states.sum(axis=1)
        self.index = {tuple(s): i for i, s in enumerate(self.states)}
        self.a = [self._annihilator(j) for j in range(M)]
        self.ad = [op.conj().T.tocsr() for op in self.a]

    def _annihilator(self, j):
        rows, cols, vals = [], [], []
        for i, s in enumerate(self.states):
            if s[j] > 0:
                t = s.copy()
                t[j] -= 1
                rows.append(self.index[tuple(t)])
                cols.append(i)
                vals.append(np.sqrt(s[j]))
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim), dtype=complex)

    def vacuum(self):
        e = np.zeros(self.dim, dtype=complex)
        e[0] = 1.0
        return e

    def identity(self):
        return sp.identity(self.dim, dtype=complex, format="csr")

    def number(self):
        return sp.diags(self.sector.astype(complex)).tocsr()

    def safe(self, margin):
        return self.sector <= self.n_max - margin

    def tail_mass(self, vec, depth=2):
        return float(np.sum(np.abs(vec[self.sector > self.n_max - depth]) ** 2))

    def sector_norms(self, vec):
        return np.sqrt(np.bincount(self.sector, weights=np.abs(vec) ** 2, minlength=self.n_max + 1))

    def restrict(self, vec, other):
        """Copy amplitudes of vec (living on self) into the basis of other."""
        out = np.zeros(other.dim, dtype=complex)
        for i, s in enumerate(self.states):
            j = other.index.get(tuple(s))
            if j is not None:
                out[j] = vec[i]
        return out

    # symmetric lattice tensors <-> sector amplitudes
    def sector_states(self, n):
        return np.flatnonzero(self.sector == n)

    def tensor_to_amplitudes(self, T, n):
        """Amplitudes of (1/sqrt(n!)) sum_J T_J a^dag_J Omega for symmetric T."""
        idx = self.sector_states(n)
        out = np.zeros(len(idx), dtype=complex)
        for r, i in enumerate(idx):
            occ = self.states[i]
            rep = tuple(np.repeat(np.arange(self.M), occ))
            mult = factorial(n) / np.prod([factorial(o) for o in occ])
            out[r] = np.sqrt(mult) * (T[rep] if n else T)
        return out

    def amplitudes_to_tensor(self, amps, n):
        T = np.zeros((self.M,) * n, dtype=complex)
        for r, i in enumerate(self.sector_states(n)):
            occ = self.states[i]
            mult = factorial(n) / np.prod([factorial(o) for o in occ])
            val = amps[r] / np.sqrt(mult)
            base = tuple(np.repeat(np.arange(self.M), occ))
            for perm in set(itertools.permutations(base)):
                T[perm] = val
        return T


def build_space_and_ops(M_f, n_max):
    space = FockSpace(M_f, n_max)
    return space, space.a, space.ad


# ------------------------------------------------------------------ operators


def linear(space, f, g, w):
    """int f(x) a_x + g(x) a*_x dx."""
    s = np.sqrt(w)
    out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for j in range(space.M):
        out = out + s * (f[j] * space.a[j] + g[j] * space.ad[j])
    return out.tocsr()


def quadratic(space, d, k, l, w):
    """Q(d, k, l) = -int d N_xy + 1/2 int k a_x a_y - 1/2 int l a*_x a*_y."""
    a, ad = space.a, space.ad
    out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for x in range(space.M):
        for y in range(space.M):
            term = 0
            if d[x, y] != 0:
                term = term - d[x, y] * 0.5 * (a[x] @ ad[y] + ad[y] @ a[x])
            if k[x, y] != 0:
                term = term + 0.5 * k[x, y] * (a[x] @ a[y])
            if l[x, y] != 0:
                term = term - 0.5 * l[x, y] * (ad[x] @ ad[y])
            if not isinstance(term, int):
                out = out + w * term
    return out.tocsr()


def normal_quadratic(space, d, k, l, w):
    """Same as quadratic but with -int d a*_y a_x (normal ordered)."""
    a, ad = space.a, space.ad
    out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for x in range(space.M):
        for y in range(space.M):
            out = out + w * (-d[x, y] * (ad[y] @ a[x]) + 0.5 * k[x, y] * (a[x] @ a[y]) - 0.5 * l[x, y] * (ad[x] @ ad[y]))
    return out.tocsr()


def block_apply(S_blocks, f, g, w):
    """S(d, k, l) acting on (f; g) with weighted composition."""
    d, k, l = S_blocks
    return w * (d @ f + k @ g), w * (l @ f - d.T @ g)


def sp_dense(d, k, l):
    return np.block([[d, k], [l, -d.T]])


@dataclass
class Generators:
    H0: sp.csr_matrix
    V: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    N: float

    @property
    def H_N(self):
        return (self.H0 + self.V / self.N).tocsr()


def kinetic(space, grid):
    """H0 = int a*_x Lap a_x (the sign convention of the Hartree equation)."""
    D = grid.laplacian_matrix()
    a, ad = space.a, space.ad
    out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for i in range(space.M):
        for j in range(space.M):
            if D[i, j] != 0:
                out = out + D[i, j] * (ad[i] @ a[j])
    return out.tocsr()


def interaction(space, grid, v):
    """V = 1/2 int v(x-y) a*_x a*_y a_x a_y."""
    Vm = G.pair_matrix(grid, v)
    a, ad = space.a, space.ad
    out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for i in range(space.M):
        for j in range(space.M):
            if Vm[i, j] != 0:
                out = out + 0.5 * Vm[i, j] * (ad[i] @ ad[j] @ a[i] @ a[j])
    return out.tocsr()


def coherent_generator(space, phi, w):
    """A(phi) = a(conj phi) - a*(phi)."""
    return linear(space, np.conj(phi), -np.asarray(phi), w)


def pair_generator(space, k, w):
    """B = 1/2 int k a_x a_y - 1/2 int conj(k) a*_x a*_y."""
    k = np.asarray(k)
    if np.max(np.abs(k - k.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(k), initial=0.0)):
        raise ConfigurationError("pair kernel must be symmetric")
    return quadratic(space, np.zeros_like(k), k, np.conj(k), w)


def build_generators(space, grid, phi, k, v, N=1.0):
    if grid.n != space.M:
        raise ConfigurationError("lattice and grid sizes differ")
    w = grid.weight
    return Generators(
        H0=kinetic(space, grid),
        V=interaction(space, grid, v),
        A=coherent_generator(space, phi, w),
        B=pair_generator(space, k, w),
        N=float(N),
    )


def unitary_apply(space, generator, vec, t=1.0, tail_threshold=TAIL_THRESHOLD, check=True):
    """exp(t * generator) vec by scipy's action-of-expm algorithm."""
    out = expm_multiply(t * generator, vec)
    if check:
        tail = space.tail_mass(out)
        if tail > tail_threshold:
            raise TruncationError(f"tail mass {tail:.3e} above {tail_threshold:.1e}")
    return out


def coherent_state(space, phi, N, w):
    """Closed form of exp(-sqrt(N) A(phi)) Omega, sector by sector.

    Amplitude of |n_1..n_M> is e^{-N|phi|^2/2} prod_j (sqrt(N) phi_j)^{n_j} / sqrt(n_j!).
    """
    z = np.sqrt(N * w) * np.asarray(phi, dtype=complex)
    logfact = np.cumsum(np.log(np.maximum(np.arange(space.n_max + 1), 1)))
    norm = np.exp(-0.5 * np.sum(np.abs(z) ** 2))
    vec = np.prod(z[None, :] ** space.states, axis=1)
    vec = vec * np.exp(-0.5 * logfact[space.states].sum(axis=1))
    return norm * vec


def poisson_cutoff(N, mass_tol=1e-10, margin=2):
    """Smallest n_max with Poisson(N) mass above n_max - margin below mass_tol."""
    from scipy.stats import poisson

    n = 0
    while poisson.sf(n, N) >= mass_tol:
        n += 1
    return n + margin


def comm(X, Y):
    return X @ Y - Y @ X


# ------------------------------------------------------------------ verification


def _deviation(space, X, Y, margin):
    cols = space.safe(margin)
    diff = (X - Y)[:, cols]
    diff = diff.toarray() if sp.issparse(diff) else np.asarray(diff)
    return float(np.max(np.abs(diff), initial=0.0))


def _record(report, name, dev, tol):
    report.append({"identity": name, "max_deviation": dev, "tolerance": tol, "passed": bool(dev <= tol)})


def _random_sp(rng, M, scale=1.0, skew=False):
    d = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    k = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    k = k + k.T
    if skew:
        d = d - d.conj().T
        l = np.conj(k)
    else:
        l = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
        l = l + l.T
    return scale * d, scale * k, scale * l


def verify_algebra(M_f=2, n_max=6, w=1.0, seed=0, tol=1e-12, headroom=18, raise_on_fail=False):
    """Check the quadratic Lie-algebra identities and the coherent-state commutators.

    Returns a list of records (identity, max_deviation, tolerance, passed).
    """
    rng = np.random.default_rng(seed)
    space = FockSpace(M_f, n_max)
    a, ad = space.a, space.ad
    M = M_f
    report = []

    def Q(x, y):
        return a[x] @ a[y]

    def Qs(x, y):
        return ad[x] @ ad[y]

    def Nq(x, y):
        return 0.5 * (a[x] @ ad[y] + ad[y] @ a[x])

    dl = np.eye(M)
    devs = {"QQ*": 0.0, "QN": 0.0, "NQ*": 0.0, "NN": 0.0}
    for x, y, z, u in itertools.product(range(M), repeat=4):
        devs["QQ*"] = max(devs["QQ*"], _deviation(space, comm(Q(x, y), Qs(z, u)),
                          dl[x, z] * Nq(y, u) + dl[x, u] * Nq(y, z) + dl[y, z] * Nq(x, u) + dl[y, u] * Nq(x, z), 2))
        devs["QN"] = max(devs["QN"], _deviation(space, comm(Q(x, y), Nq(z, u)), dl[x, u] * Q(y, z) + dl[y, u] * Q(x, z), 2))
        # the starred Q in the second term is required for the identity to hold
        devs["NQ*"] = max(devs["NQ*"], _deviation(space, comm(Nq(x, y), Qs(z, u)), dl[x, z] * Qs(y, u) + dl[x, u] * Qs(y, z), 3))
        devs["NN"] = max(devs["NN"], _deviation(space, comm(Nq(x, y), Nq(z, u)), dl[x, u] * Nq(z, y) - dl[y, z] * Nq(x, u), 2))
    for name, dev in devs.items():
        _record(report, name, dev, tol)

    # [Q, a(f) + a*(g)] = (a, a*) S (f; g)
    dev = 0.0
    for _ in range(3):
        S = _random_sp(rng, M)
        f = rng.normal(size=M) + 1j * rng.normal(size=M)
        g = rng.normal(size=M) + 1j * rng.normal(size=M)
        lhs = comm(quadratic(space, *S, w), linear(space, f, g, w))
        rhs = linear(space, *block_apply(S, f, g, w), w)
        dev = max(dev, _deviation(space, lhs, rhs, 3))
    _record(report, "meta1", dev, tol)

    # e^Q (a, a*)(f; g) e^{-Q} = (a, a*) e^S (f; g), on a space with headroom
    big = FockSpace(M_f, n_max + headroom)
    dev = 0.0
    for _ in range(3):
        S = _random_sp(rng, M, scale=0.02 / w, skew=True)
        Qop = quadratic(big, *S, w)
        f = rng.normal(size=M) + 1j * rng.normal(size=M)
        g = rng.normal(size=M) + 1j * rng.normal(size=M)
        E = sla.expm(w * sp_dense(*S))
        fg = E @ np.concatenate([f, g])
        cols = np.eye(big.dim, dtype=complex)[:, big.sector <= n_max - 2]
        lhs = expm_multiply(Qop, linear(big, f, g, w) @ expm_multiply(-Qop, cols))
        rhs = linear(big, fg[:M], fg[M:], w) @ cols
        rows = big.sector <= n_max - 1
        dev = max(dev, float(np.max(np.abs((lhs - rhs)[rows]))))
    _record(report, "metaexp", dev, tol)

    # I([S1, S2]) = [I(S1), I(S2)]
    dev = 0.0
    for _ in range(3):
        S1, S2 = _random_sp(rng, M), _random_sp(rng, M)
        C = w * (sp_dense(*S1) @ sp_dense(*S2) - sp_dense(*S2) @ sp_dense(*S1))
        blocks = (C[:M, :M], C[:M, M:], C[M:, :M])
        lhs = quadratic(space, *blocks, w)
        rhs = comm(quadratic(space, *S1, w), quadratic(space, *S2, w))
        dev = max(dev, _deviation(space, lhs, rhs, 4))
    _record(report, "isomorphism", dev, tol)

    # nested commutators of A(phi) with V
    grid = G.GridSpec(1, M, M * w)
    phi = rng.normal(size=M) + 1j * rng.normal(size=M)
    phi /= G.l2_norm(grid, phi)
    v = G.symmetrize_even(grid, rng.uniform(0.1, 1.0, size=M))
    for name, dev in nested_commutators(space, grid, phi, v).items():
        _record(report, name, dev, tol)

    if raise_on_fail:
        bad = [r["identity"] for r in report if not r["passed"]]
        if bad:
            raise VerificationError("identities failed: " + ", ".join(bad))
    return report


def nested_commutators(space, grid, phi, v):
    """Deviations of the four nested commutators [A,..[A,V]] from their closed forms."""
    w = grid.weight
    a, ad = space.a, space.ad
    Vm = G.pair_matrix(grid, v)
    ph = np.sqrt(w) * phi  # lattice amplitude
    conv = np.real(G.convolve(grid, v, np.abs(phi) ** 2))
    A = coherent_generator(space, phi, w)
    V = interaction(space, grid, v)
    M = space.M
    c1 = comm(A, V)
    c2 = comm(A, c1)
    c3 = comm(A, c2)
    c4 = comm(A, c3)
    f1 = sum(Vm[x, y] * (np.conj(ph[y]) * ad[x] @ a[x] @ a[y] + ph[y] * ad[x] @ ad[y] @ a[x])
             for x in range(M) for y in range(M))
    f2 = sum(Vm[x, y] * (np.conj(ph[y] * ph[x]) * a[x] @ a[y] + ph[y] * ph[x] * ad[x] @ ad[y]
                         + 2 * np.conj(ph[y]) * ph[x] * ad[x] @ a[y]) for x in range(M) for y in range(M))
    f2 = f2 + 2 * sum(conv[x] * ad[x] @ a[x] for x in range(M))
    f3 = 6 * sum(conv[x] * (ph[x] * ad[x] + np.conj(ph[x]) * a[x]) for x in range(M))
    scalar = 12 * w * np.sum(conv * np.abs(phi) ** 2)
    f4 = scalar * space.identity()
    return {
        "[A,V]": _deviation(space, c1, f1, 3),
        "[A,[A,V]]": _deviation(space, c2, f2, 4),
        "[A,[A,[A,V]]]": _deviation(space, c3, f3, 5),
        "[A,[A,[A,[A,V]]]]": _deviation(space, c4, f4, 6),
    }


def conjugated_error_states(grid, phi, k, v, n_max=32):
    """Exact e^B V e^{-B} Omega and e^B [A, V] e^{-B} Omega on a 1d lattice.

    Computed by exponential actions on a space with generous headroom; the
    returned space is the one the vectors live on.
    """
    space = FockSpace(grid.n, n_max)
    gen = build_generators(space, grid, phi, k, v)
    psi = clip(space, unitary_apply(space, -gen.B, space.vacuum(), check=False))
    gvec = unitary_apply(space, gen.B, gen.V @ psi, check=False)
    fvec = unitary_apply(space, gen.B, comm(gen.A, gen.V) @ psi, check=False)
    return space, gvec, fvec


# ------------------------------------------------------------------ generators of Psi(t)


CLIP_MARGIN = 6


def clip(space, vec, margin=CLIP_MARGIN):
    """Zero the sectors where truncated polynomial operators are not exact."""
    out = np.array(vec, dtype=complex)
    out[space.sector > space.n_max - margin] = 0.0
    return out


def conjugate_apply(space, B, X, vec):
    """e^B X e^{-B} vec; the intermediate state is clipped before X acts."""
    return expm_multiply(B, X @ clip(space, expm_multiply(-B, vec)))


def exp_derivative_apply(B, Bt, vec):
    """(d/dt e^{B}) e^{-B} vec, from the block exponential [[B, Bt], [0, B]]."""
    n = B.shape[0]
    big = sp.bmat([[B, Bt], [None, B]], format="csr")
    y = expm_multiply(-B, vec)
    out = expm_multiply(big, np.concatenate([np.zeros(n, dtype=complex), y]))
    return out[:n]


def exact_generator_apply(space, grid, phi, phi_t, k, k_t, v, N, vec):
    """L vec with L defined by (1/i) dPsi/dt = L Psi, straight from the definition of Psi.

    L = (1/i)(d e^B)e^{-B} + e^B [ (1/i)(d e^{sA}) e^{-sA} + e^{sA} H_N e^{-sA} ] e^{-B},
    s = sqrt(N), with the inner conjugation expanded as a terminating
    commutator series.
    """
    w = grid.weight
    s = np.sqrt(N)
    H0 = kinetic(space, grid)
    V = interaction(space, grid, v)
    A = coherent_generator(space, phi, w)
    At = coherent_generator(space, phi_t, w)
    B = pair_generator(space, k, w)
    Bt = pair_generator(space, k_t, w)
    X = (s * At + 0.5 * N * comm(A, At)) / 1j
    # e^{sA} H0 e^{-sA}: series stops after two commutators
    c1 = comm(A, H0)
    X = X + H0 + s * c1 + 0.5 * N * comm(A, c1)
    # e^{sA} V e^{-sA} / N: four commutators
    term, Vconj = V, V.copy()
    for j in range(1, 5):
        term = comm(A, term)
        Vconj = Vconj + s**j / factorial(j) * term
    X = X + Vconj / N
    return exp_derivative_apply(B, Bt, vec) / 1j + conjugate_apply(space, B, X, vec)


def one_body_normal(space, grid, gm_node):
    """H0 + int v phibar(y) phi(x) a*_x a_y + int (v*|phi|^2) a*_x a_x."""
    w = grid.weight
    a, ad = space.a, space.ad
    out = kinetic(space, grid)
    M = space.M
    for x in range(M):
        for y in range(M):
            c = -w * gm_node.g_nl[y, x]
            if c != 0:
                out = out + c * (ad[x] @ a[y])
        out = out + gm_node.conv[x] * (ad[x] @ a[x])
    return out.tocsr()


def assembled_generator_apply(space, grid, phi, v, N, gm_node, k, d, astar, R, chi0, chi1, vec,
                              obstructions=True):
    """L vec assembled from the reduction formulas.

    L = H_G - int d a*_y a_x + N^{-1/2} e^B [A,V] e^{-B} + N^{-1} e^B V e^{-B}
        - N chi0 - chi1 + (obstructions),
    where the obstructions vanish when phi solves the Hartree equation
    (R = 0) and k solves the kernel equation (astar = 0):
        sqrt(N) e^B (a*(R) + a(Rbar)) e^{-B} + N Re<R, phi>
        - 1/2 int astar a_x a_y ... (the sp block (-astar, conj astar))
        - i/2 Im tr d.
    """
    w = grid.weight
    A = coherent_generator(space, phi, w)
    V = interaction(space, grid, v)
    B = pair_generator(space, k, w)
    Lt = one_body_normal(space, grid, gm_node)
    zero = np.zeros_like(d)
    Lt = Lt + normal_quadratic(space, d, zero, zero, w)
    out = Lt @ vec
    out = out + conjugate_apply(space, B, comm(A, V) / np.sqrt(N) + V / N, vec)
    out = out - (N * chi0 + chi1) * vec
    if obstructions:
        out = out + normal_quadratic(space, zero, -astar, np.conj(astar), w) @ vec
        out = out - 0.5j * np.imag(w * np.trace(d)) * vec
        lin = linear(space, np.conj(R), R, w)
        out = out + np.sqrt(N) * conjugate_apply(space, B, lin, vec)
        out = out + N * np.real(w * np.sum(np.conj(phi) * R)) * vec
    return out
