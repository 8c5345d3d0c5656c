import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bosepair import checks as C
from bosepair import error_norms as E
from bosepair import grid as G
from bosepair import kernels as K
from bosepair.errors import ConfigurationError


def _instance(seed, scale=0.2, M=3):
    grid, phi, k, v = C.random_instance(seed, M_f=M, L=3.0, k_scale=scale)
    u, p = K.sh_ch_series(k, grid.weight)
    return grid, phi, k, v, u, p


def test_zero_kernel_gives_zero_errors():
    g, v = G.build_domain(1, 4, 2.0, G.PotentialSpec("gaussian", 0.3, 0.5))
    z = np.zeros((4, 4), complex)
    gval, gcomps = E.g_error(g, z, z, v)
    fval, fcomps = E.f_error(g, z, z, np.ones(4) / np.sqrt(2.0), v)
    assert gval == 0 and fval == 0
    assert all(np.all(c.payload == 0) for c in gcomps + fcomps)


def test_slots_and_ranks():
    g, phi, k, v, u, p = _instance(0)
    _, gcomps = E.g_error(g, u, p, v)
    _, fcomps = E.f_error(g, u, p, phi, v)
    assert [c.slot for c in gcomps] == [0, 2, 4]
    assert [c.slot for c in fcomps] == [1, 3]
    for c in gcomps + fcomps:
        assert np.ndim(c.payload) == c.slot
        if c.slot >= 2:
            assert np.allclose(c.payload, E.symmetrize(c.payload), atol=1e-15)


def test_onee_split_matches_direct():
    for seed in range(3):
        g, phi, k, v, u, p = _instance(seed, 0.6, 5)
        parts = E.onee_split(g, u, p, v)
        direct = E.g_terms(g, u, p, v, slot4=False)["onee"][1]
        assert np.max(np.abs(sum(parts.values()) - direct)) < 1e-10


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_leading_components_linear_in_k(seed):
    g, phi, k, v, u, p = _instance(seed, 0.02)
    _, _, _, _, u2, p2 = _instance(seed, 0.01)
    f1 = E.f_error(g, u, p, phi, v)[0]
    f2 = E.f_error(g, u2, p2, phi, v)[0]
    g1 = E.g_error(g, u, p, v)[0]
    g2 = E.g_error(g, u2, p2, v)[0]
    assert f1 / f2 == pytest.approx(2.0, rel=0.05)
    assert g1 / g2 == pytest.approx(2.0, rel=0.05)


def test_slot4_guard():
    g = G.GridSpec(1, 17, 2.0)
    z = np.zeros((17, 17))
    with pytest.raises(ConfigurationError):
        E.g_terms(g, z, z, np.zeros(17), slot4=True)


def test_error_bound_examples():
    t = np.linspace(0, 1, 11)
    assert np.all(E.error_bound(t, np.zeros(11), np.zeros(11), 4) == 0)
    b = E.error_bound(t, np.full(11, 0.3), np.full(11, 0.7), 4.0)
    assert np.allclose(b, 0.3 * t / 2 + 0.7 * t / 4, atol=1e-15)
    f = np.linspace(0.1, 0.2, 11)
    bounds = [E.error_bound(t, f, f, N)[-1] for N in (1, 2, 4, 8)]
    assert all(x > y for x, y in zip(bounds, bounds[1:]))
    with pytest.raises(ConfigurationError):
        E.error_bound(t, f, f, 0.5)


def test_packaged_constants_match_nominal():
    stored, doc = E.load_constants()
    nominal = E.nominal_constants()
    assert set(stored) == set(nominal)
    for name, val in stored.items():
        assert val == pytest.approx(nominal[name], abs=1e-12)
    for c in doc["constants"]:
        assert {"name", "value", "slot", "residual"} <= set(c)
    assert "lattice" in doc


def test_calibration_identity_on_fresh_instances():
    rows = C.error_oracle_check(seeds=(7, 8, 9))
    for r in rows:
        assert r["g_dev"] < 1e-6 and r["f_dev"] < 1e-6
        assert r["g_slots"] == [0, 2, 4] and r["f_slots"] == [1, 3]
