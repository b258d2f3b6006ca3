import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localredfield.analysis import (bond_currents, eigenbasis_populations_coherences, gibbs_state, min_eigenvalue,
                                    site_densities, time_averaged_distance, trace_norm_distance)
from localredfield.experiments import xxz_two_bath
from localredfield.models import SIGMA_Z, XxzSpec, build_initial_state, xxz_chain
from localredfield.operators import LatticeSpec, embed_site_operator, projector
from localredfield.redfield import evolve, exact_redfield


def random_density(d, rng):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_trace_distance_examples():
    rho = np.diag([0.3, 0.7]).astype(complex)
    assert trace_norm_distance(rho, rho) == 0.0
    up, down = projector(np.array([1, 0])), projector(np.array([0, 1]))
    assert trace_norm_distance(up, down) == pytest.approx(2.0)
    assert trace_norm_distance(np.diag([0.2, 0.8]), np.diag([0.65, 0.35])) == pytest.approx(0.9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_trace_distance_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(4, rng) for _ in range(3))
    assert trace_norm_distance(a, b) == pytest.approx(trace_norm_distance(b, a), abs=1e-14)
    assert trace_norm_distance(a, c) <= trace_norm_distance(a, b) + trace_norm_distance(b, c) + 1e-12
    assert 0 <= trace_norm_distance(a, b) <= 2 + 1e-12


def test_gibbs_limits():
    model = xxz_chain(XxzSpec(4))
    hot = gibbs_state(model.h_s, 1e6 * 20)
    assert np.max(np.abs(hot - np.eye(16) / 16)) < 1e-5
    h1 = 0.6
    spin = embed_site_operator(LatticeSpec.spins(1), 0, h1 * SIGMA_Z)
    rho = gibbs_state(spin, 1.3)
    assert rho[1, 1].real / rho[0, 0].real == pytest.approx(np.exp(2 * h1 / 1.3))
    h = model.h_s.toarray()
    energies = [np.real(np.trace(h @ gibbs_state(model.h_s, T))) for T in (8.0, 4.0, 2.0, 1.0, 0.5)]
    assert all(b < a for a, b in zip(energies, energies[1:]))


def test_currents_vanish_for_gibbs_and_product_states():
    system = xxz_two_bath(L=4)
    assert np.max(np.abs(bond_currents(system.model, gibbs_state(system.h_s, 2.2)))) < 1e-10
    up = projector(build_initial_state(system.model.lattice, "all-up"))
    assert np.max(np.abs(bond_currents(system.model, up))) < 1e-15


def test_current_continuity_in_the_bulk():
    system = xxz_two_bath(L=5, T_r=6.0)
    gen = exact_redfield(system.h_s, system.channels)
    psi = build_initial_state(system.model.lattice, "x-polarized")
    rho = evolve(gen, projector(psi), [0.0, 1.5])[-1]
    drho = gen.apply_hermitian(rho)
    j = bond_currents(system.model, rho)
    for i in range(1, system.model.L - 1):
        sz = system.model.site_op(i, SIGMA_Z).toarray()
        dsz = np.real(np.trace(sz @ drho))
        assert dsz == pytest.approx(j[i - 1] - j[i], abs=1e-10)


def test_populations_and_coherences():
    system = xxz_two_bath(L=3)
    cache = system.eigen_cache
    E, U = cache
    pops, coh = eigenbasis_populations_coherences(gibbs_state(system.h_s, 2.2, cache), cache)
    p = np.exp(-E / 2.2)
    assert np.allclose(pops, p / p.sum()) and np.allclose(coh, 0, atol=1e-15)
    pops, _ = eigenbasis_populations_coherences(projector(U[:, 5]), cache)
    assert pops[5] == pytest.approx(1.0) and pops.sum() == pytest.approx(1.0)
    rho = random_density(8, np.random.default_rng(3))
    assert eigenbasis_populations_coherences(rho, cache)[0].sum() == pytest.approx(1.0)


def test_site_densities_and_min_eigenvalue():
    system = xxz_two_bath(L=3)
    up = projector(build_initial_state(system.model.lattice, "all-up"))
    assert np.allclose(site_densities(system.model, up), 1.0)
    assert min_eigenvalue(np.diag([1.2, -0.2])) == pytest.approx(-0.2)


def test_time_averaged_distance():
    t = np.linspace(0, 4, 5)
    a = [np.diag([0.5, 0.5])] * 5
    assert time_averaged_distance(a, a, t, 4.0) == 0.0
    b = [np.diag([0.6, 0.4])] * 5
    assert time_averaged_distance(a, b, t, 4.0) == pytest.approx(0.2)
    # snapshots past t_max are ignored
    c = b[:3] + [np.diag([1.0, 0.0])] * 2
    assert time_averaged_distance(a, c, t, 2.0) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        time_averaged_distance(a, b, t, 4.0, t_grid_b=t + 1)
