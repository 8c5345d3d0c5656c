"""Acceptance suite: one pass/fail line per criterion, at the stated tolerances."""
import time

import numpy as np
import pytest

from bosepair import checks as C
from bosepair import error_norms as E
from bosepair import fock as F
from bosepair import grid as G
from bosepair import hartree as H
from bosepair import kernels as K
from bosepair import pair_kernel as P
from bosepair import reduction as R


@pytest.fixture(scope="module")
def two_site_run():
    """M_f = 2, N = 1, eps = 0.05, t in [0, 0.5]."""
    t0 = time.perf_counter()
    g, v = G.build_domain(1, 2, 2.0, G.PotentialSpec("gaussian", 0.05, 1.0))
    tr = H.hartree_evolve(g, H.gaussian_datum(g, 0.7, center=[0.3]), v, 1e-3, 500)
    gm = P.build_g_m(g, tr.phi, v)
    pair = P.picard_solve(g, tr.t, gm, tol=1e-13, max_iter=60)
    diag = R.diagnostics(g, tr.phi, v, pair, gm)
    f, gg = E.error_series(g, pair, tr.phi, v)
    return dict(grid=g, v=v, tr=tr, gm=gm, pair=pair, diag=diag, f=f, g=gg, setup=time.perf_counter() - t0)


def test_criterion_1_algebra(record_criterion):
    t0 = time.perf_counter()
    reports = []
    for M_f, n_max in ((2, 4), (2, 6), (3, 4)):
        for seed in range(5):
            reports += F.verify_algebra(M_f=M_f, n_max=n_max, seed=seed)
    runtime = time.perf_counter() - t0
    worst = max(reports, key=lambda r: r["max_deviation"])
    names = sorted({r["identity"] for r in reports})
    ok = all(r["passed"] for r in reports) and worst["max_deviation"] <= 1e-12 and runtime < 30
    record_criterion(1, "algebra suite", ok,
                     f"{len(names)} identities x 15 configurations, max deviation "
                     f"{worst['max_deviation']:.2e} ({worst['identity']}), runtime {runtime:.1f}s")
    assert ok


def test_criterion_2_kernel_algebra(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    grid = G.GridSpec(1, 16, 2 * np.pi)
    w = grid.weight
    hyp = series = 0.0
    for _ in range(20):
        k = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        k = k + k.T
        k *= rng.uniform(0.05, 1.0) / K.hs_norm(k, w)
        u, p = K.sh_ch_series(k, w)
        ch = K.delta(16, w) + p
        hyp = max(hyp, K.hs_norm(K.compose(ch, ch, w) - K.compose(u, np.conj(u), w) - K.delta(16, w), w))
        hyp = max(hyp, K.hs_norm(K.compose(ch, u, w) - K.compose(u, np.conj(ch), w), w))
        chb, shb = K.exp_block_oracle(k, w)
        series = max(series, K.hs_norm(chb - ch, w), K.hs_norm(shb - u, w))
    runtime = time.perf_counter() - t0
    ok = hyp < 1e-10 and series < 1e-10 and runtime < 10
    record_criterion(2, "kernel algebra", ok,
                     f"hyperbolic identities {hyp:.2e}, series vs block exponential {series:.2e}, "
                     f"20 kernels at M=16, runtime {runtime:.2f}s")
    assert ok


def test_criterion_3_hartree(record_criterion):
    t0 = time.perf_counter()
    g, v = G.build_domain(1, 32, 2 * np.pi, G.PotentialSpec("gaussian", 0.05, 0.5))
    phi0 = H.gaussian_datum(g, 0.8)
    tr = H.hartree_evolve(g, phi0, v, 1e-3, 1000)
    dm = np.max(np.abs(tr.mass - tr.mass[0]))
    de = np.max(np.abs(tr.energy - tr.energy[0]))
    ratio, _, _ = H.self_convergence(g, phi0, v, 1e-3, 1000)
    runtime = time.perf_counter() - t0
    ok = dm < 1e-8 and de < 1e-8 and abs(ratio - 4) <= 0.5 and runtime < 60
    record_criterion(3, "Hartree conservation", ok,
                     f"mass drift {dm:.2e}, energy drift {de:.2e}, self-convergence ratio {ratio:.3f}, "
                     f"runtime {runtime:.1f}s")
    assert ok


def test_criterion_4_picard(record_criterion):
    t0 = time.perf_counter()
    details, ok = [], True
    for eps in (0.0125, 0.025, 0.05):
        g, v = G.build_domain(1, 16, 2 * np.pi, G.PotentialSpec("gaussian", eps, 0.5))
        tr = H.hartree_evolve(g, H.gaussian_datum(g, 0.8), v, 0.01, 100)
        gm = P.build_g_m(g, tr.phi, v)
        pair = P.picard_solve(g, tr.t, gm, tol=1e-10)
        hist = np.asarray(pair.history)
        ratio = float(np.max(hist[1:] / hist[:-1]))
        sup_m = float(np.max(K.hs_norm(gm.m, g.weight)))
        res = float(np.max(P.residual_newnls(g, pair, gm)))
        ast = float(np.max(R.astar_coeff_norm(gm, pair.assembly, g.weight, P.transport_fd(g, pair.p, pair.dt))))
        ok &= pair.converged and ratio < 0.5 and res < 1e-6 * sup_m and ast <= 10 * res and res <= 10 * ast
        details.append(f"eps={eps}: ratio {ratio:.3f}, residual {res:.2e} (< {1e-6 * sup_m:.2e}), astar {ast:.2e}")
    runtime = time.perf_counter() - t0
    ok &= runtime < 300
    record_criterion(4, "Picard convergence", ok, "; ".join(details) + f"; runtime {runtime:.1f}s")
    assert ok


def test_criterion_5_trivial_limit(record_criterion):
    g, v = G.build_domain(1, 8, 2 * np.pi, G.PotentialSpec("zero"))
    tr = H.hartree_evolve(g, H.gaussian_datum(g, 0.8), v, 0.01, 50)
    gm = P.build_g_m(g, tr.phi, v)
    pair = P.picard_solve(g, tr.t, gm)
    diag = R.diagnostics(g, tr.phi, v, pair, gm)
    f, gg = E.error_series(g, pair, tr.phi, v)
    bound = E.error_bound(tr.t, f, gg, 1.0)
    zeros = {
        "k": np.all(pair.k == 0),
        "chi0": np.all(diag.chi0 == 0),
        "chi1": np.all(diag.chi1 == 0),
        "f": np.all(f == 0),
        "g": np.all(gg == 0),
        "bound": np.all(bound == 0),
    }
    ok = all(zeros.values())
    record_criterion(5, "trivial limit", ok, ", ".join(f"{k}={'0' if z else 'nonzero'}" for k, z in zeros.items()))
    assert ok


def test_criterion_6_error_norm_oracle(record_criterion):
    t0 = time.perf_counter()
    rows = C.error_oracle_check(seeds=C.CHECK_SEEDS)
    runtime = time.perf_counter() - t0
    assert not set(C.CHECK_SEEDS) & set(C.CALIBRATION_SEEDS)
    dev = max(max(r["g_dev"], r["f_dev"]) for r in rows)
    slots = all(r["g_slots"] == [0, 2, 4] and r["f_slots"] == [1, 3] for r in rows)
    ok = dev < 1e-6 and slots and runtime < 60
    record_criterion(6, "error norms vs oracle", ok,
                     f"max |calibrated - exact| {dev:.2e} over seeds {list(C.CHECK_SEEDS)}, slots "
                     f"{rows[0]['g_slots']} and {rows[0]['f_slots']}, runtime {runtime:.2f}s")
    assert ok


def test_criterion_7_vector_identity(record_criterion):
    t0 = time.perf_counter()
    results = [C.vector_identity_check(seed=s, N=N) for s in (0, 1, 2) for N in (1.0, 4.0, 25.0)]
    runtime = time.perf_counter() - t0
    dev = max(r["deviation"] for r in results)
    ok = dev < 1e-10 and runtime < 60
    record_criterion(7, "vacuum vector identity", ok,
                     f"max deviation {dev:.2e} over 3 instances x N in (1, 4, 25), runtime {runtime:.1f}s")
    assert ok


def test_criterion_8_end_to_end(record_criterion, two_site_run):
    r = two_site_run
    t0 = time.perf_counter()
    rep = C.end_to_end_check(r["grid"], r["v"], r["tr"], r["pair"], r["gm"], r["diag"], r["f"], r["g"],
                             N=1.0, n_max=10)
    runtime = time.perf_counter() - t0 + r["setup"]
    s = rep.summary()
    ok = rep.passed() and runtime < 600
    margins = ", ".join(f"t={rep.t[j]:.3f}: {m:.2e}" for j, m in list(zip(rep.nodes, rep.margins))[::6])
    record_criterion(8, "end-to-end structure", ok,
                     f"derivative identity {s['derivative_dev_max']:.2e} (with obstruction terms "
                     f"{s['derivative_dev_obstructed_max']:.2e}; strict n_max=10 truncation "
                     f"{s['strict_truncation_derivative_dev']:.2e}), l2 estimate min margin RHS*1.05-LHS "
                     f"{s['min_ratio_margin']:.2e}, raw margins [{margins}], Im tr d relative "
                     f"{s['trace_imag_rel']:.2e}, runtime {runtime:.1f}s")
    assert ok


def test_criterion_9_scaling(record_criterion, two_site_run):
    g, vu = G.build_domain(1, 16, 2 * np.pi, G.PotentialSpec("gaussian", 1.0, 0.5))
    ratios, spread = C.kernel_scaling(g, vu, H.gaussian_datum(g, 0.8), 0.01, 100, (0.0125, 0.025, 0.05))
    r = two_site_run
    rel, scaled, _ = C.bound_scaling(r["tr"].t, r["f"], r["g"], (1.0, 4.0, 16.0))
    ok = spread < 0.2 and rel < 0.05
    record_criterion(9, "scaling laws", ok,
                     f"sup|k|/eps = {np.round(ratios, 5).tolist()} (spread {spread:.2%}); sqrt(N)*bound "
                     f"{np.array2string(scaled, precision=4)} extrapolates to int f within {rel:.1e}")
    assert ok
