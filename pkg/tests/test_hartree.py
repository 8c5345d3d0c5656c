import numpy as np
import pytest

from bosepair import grid as G
from bosepair import hartree as H
from bosepair.errors import ConfigurationError, DimensionError, DivergenceError, InstabilityError


def test_rhs_plane_wave_free():
    g = G.GridSpec(1, 32, 2 * np.pi)
    phi = H.plane_wave(g, 3)
    rhs = H.hartree_rhs(g, phi, np.zeros(g.n))
    assert np.max(np.abs(rhs + 1j * 9 * phi)) < 1e-12


def test_rhs_constant_condensate():
    g, v = G.build_domain(1, 16, 1.0, G.PotentialSpec("gaussian", 0.3, 0.2))
    c = 0.6 - 0.8j
    phi = np.full(g.n, c)
    int_v = g.weight * v.sum()
    assert np.allclose(H.hartree_rhs(g, phi, v), 1j * abs(c) ** 2 * int_v * phi, atol=1e-14)


def _fd_oracle(g, phi, v):
    """Three-point Laplacian plus a direct-sum convolution."""
    lap = (np.roll(phi, -1) - 2 * phi + np.roll(phi, 1)) / g.h**2
    rho = np.abs(phi) ** 2
    idx = np.arange(g.n)
    conv = np.array([g.weight * v[(i - idx) % g.n] @ rho for i in range(g.n)])
    return 1j * (lap + conv * phi)


def test_rhs_against_finite_difference_oracle():
    errs = []
    for M in (2048, 4096):
        g, v = G.build_domain(1, M, 2 * np.pi, G.PotentialSpec("gaussian", 0.05, 0.5))
        x = g.coords()[0]
        phi = (1 + 0.2 * np.cos(x)) * np.exp(1j * x)
        errs.append(np.max(np.abs(H.hartree_rhs(g, phi, v) - _fd_oracle(g, phi, v))))
    assert errs[1] < 1e-6
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_rhs_dimension_error():
    g = G.GridSpec(1, 8, 1.0)
    with pytest.raises(DimensionError):
        H.hartree_rhs(g, np.ones(7), np.zeros(8))


def test_free_flow_exact():
    g = G.GridSpec(1, 32, 2 * np.pi)
    phi0 = H.plane_wave(g, 2)
    tr = H.hartree_evolve(g, phi0, np.zeros(g.n), 0.01, 50)
    assert np.max(np.abs(tr.phi[-1] - np.exp(-4j * 0.5) * phi0)) < 1e-10


def test_conservation_1000_steps():
    g, v = G.build_domain(1, 32, 2 * np.pi, G.PotentialSpec("gaussian", 0.05, 0.5))
    tr = H.hartree_evolve(g, H.gaussian_datum(g, 0.8), v, 1e-3, 1000)
    assert np.max(np.abs(tr.mass - tr.mass[0])) < 1e-10
    assert np.max(np.abs(tr.energy - tr.energy[0])) < 1e-8


def test_second_order_self_convergence():
    g, v = G.build_domain(1, 32, 2 * np.pi, G.PotentialSpec("gaussian", 0.5, 0.5))
    ratio, e1, e2 = H.self_convergence(g, H.gaussian_datum(g, 0.5, momentum=1), v, 0.02, 25)
    assert 3.5 < ratio < 4.5


def test_conserved_quantities_examples():
    g, v = G.build_domain(1, 16, 1.0, G.PotentialSpec("gaussian", 0.2, 0.1))
    mass, energy = H.conserved_quantities(g, np.ones(g.n), v)
    assert mass == pytest.approx(1.0)
    assert energy == pytest.approx(-0.5 * g.weight * v.sum(), rel=1e-13)
    phi = H.gaussian_datum(g, 0.2, momentum=1)
    _, e0 = H.conserved_quantities(g, phi, np.zeros(g.n))
    assert e0 >= 0


def test_energy_gradient_directional_derivative(rng):
    g, v = G.build_domain(1, 32, 2 * np.pi, G.PotentialSpec("gaussian", 0.4, 0.5))
    phi = H.gaussian_datum(g, 0.7, momentum=1)
    eta = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    grad = H.energy_gradient(g, phi, v)
    eps = 1e-6
    ep = H.conserved_quantities(g, phi + eps * eta, v)[1]
    em = H.conserved_quantities(g, phi - eps * eta, v)[1]
    fd = (ep - em) / (2 * eps)
    assert fd == pytest.approx(2 * np.real(G.l2_inner(g, eta, grad)), abs=1e-6)


def test_instability_and_divergence():
    g, v = G.build_domain(1, 16, 2 * np.pi, G.PotentialSpec("gaussian", 0.05, 0.5))
    phi = H.gaussian_datum(g, 0.8)
    bad = phi.copy()
    bad[0] = np.nan
    with pytest.raises(DivergenceError):
        H.hartree_evolve(g, bad, v, 1e-3, 3)


def test_initial_datum_kinds(tmp_path):
    g = G.GridSpec(1, 16, 2 * np.pi)
    phi = H.initial_datum(g, {"kind": "gaussian", "width": 0.5})
    assert G.l2_norm(g, phi) == pytest.approx(1.0, abs=1e-12)
    path = tmp_path / "phi.npy"
    np.save(path, 3 * phi)
    assert np.allclose(H.initial_datum(g, {"kind": "file", "path": str(path)}), phi)
    with pytest.raises(ConfigurationError):
        H.initial_datum(g, {"kind": "soliton"})


def test_instability_error_on_mass_drift(monkeypatch):
    g, v = G.build_domain(1, 16, 2 * np.pi, G.PotentialSpec("gaussian", 0.05, 0.5))
    real_step = H.strang_step
    monkeypatch.setattr(H, "strang_step", lambda *a, **k: 1.001 * real_step(*a, **k))
    with pytest.raises(InstabilityError):
        H.hartree_evolve(g, H.gaussian_datum(g, 0.8), v, 1e-3, 3)
