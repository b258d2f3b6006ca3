"""Acceptance criteria A1-A11, each reported as one PASS/FAIL line."""

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE, eigenbasis_taylor_u
from localredfield.analysis import (bond_currents, eigenbasis_populations_coherences, gibbs_state, min_eigenvalue,
                                    time_averaged_distance, trace_norm_distance)
from localredfield.bath import BathSpec, taylor_coefficients, w_derivatives, w_drude, w_ohmic
from localredfield.expansion import ExpansionPolicy, adhoc_u, local_u, taylor_weights
from localredfield.experiments import (Method, build_generator, loglog_slope, timescale_ratio, xxz_two_bath)
from localredfield.lindblad import local_lindblad_generator
from localredfield.models import (SIGMA_X, BoseHubbardSpec, XxzSpec, bose_hubbard_chain, boson_ops,
                                  build_initial_state, exchange_channels, hermitian_channel, xxz_chain)
from localredfield.operators import projector
from localredfield.redfield import evolve, exact_redfield, exact_u, steady_state
from localredfield.trajectories import EigenstatePopulations, TrajectoryConfig, mcwf_run

pytestmark = pytest.mark.acceptance

GAMMA = 0.25
TIGHT = dict(rtol=1e-10, atol=1e-13)
T_SWEEP = (2.2, 3.5, 5.0, 10.0, 20.0)


def verdict(tag, ok, detail):
    line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


class SteadyCache:
    """Steady states of the L=6 two-bath chain, shared by A5-A7 and A11."""

    def __init__(self):
        self._systems = {}
        self._states = {}

    def system(self, J, T_l, T_r=None):
        key = (J, T_l, T_r)
        if key not in self._systems:
            self._systems[key] = xxz_two_bath(L=6, J=J, T_l=T_l, T_r=T_r)
        return self._systems[key]

    def state(self, method, order, J, T_l, T_r=None, eps0=None):
        key = (method, order, eps0, J, T_l, T_r)
        if key not in self._states:
            gen = build_generator(self.system(J, T_l, T_r), method, order, eps0)
            self._states[key] = steady_state(gen, "nullspace")
        return self._states[key]

    def error(self, method, order, J, T_l, T_r=None, eps0=None):
        ref = self.state(Method.EXACT_REDFIELD, 0, J, T_l, T_r)
        return trace_norm_distance(self.state(method, order, J, T_l, T_r, eps0), ref)


@pytest.fixture(scope="module")
def cache():
    return SteadyCache()


# A1 -------------------------------------------------------------------------

def decoupled_channels():
    baths = [BathSpec.ohmic(GAMMA, 2.2), BathSpec.drude(GAMMA, 2.2, 30.0)]
    reservoir = BathSpec.reservoir(GAMMA, 2.0, -5.0)
    xxz = xxz_chain(XxzSpec(4, J=0.0))
    bh = bose_hubbard_chain(BoseHubbardSpec(3, J=0.0, n_cut=2))
    a, adag, _ = boson_ops(2)
    out = []
    for b in baths:
        out.append((xxz, hermitian_channel(xxz, 0, SIGMA_X, b, f"xxz-{b.family.value}")))
        out.append((bh, hermitian_channel(bh, 1, a + adag, b, f"bh-{b.family.value}")))
    out += [(xxz, ch) for ch in exchange_channels(xxz, 3, reservoir, "xxz-reservoir")]
    out += [(bh, ch) for ch in exchange_channels(bh, 0, reservoir, "bh-reservoir")]
    return out


def test_a1_exact_at_vanishing_residual():
    worst = 0.0
    for model, ch in decoupled_channels():
        exact = exact_u(model.h_s, ch.source, ch.bath, ch.kind).toarray()
        for n in range(5):
            worst = max(worst, np.linalg.norm(local_u(model.h_s, ch, n).toarray() - exact))
    verdict("A1", worst < 1e-12, f"max ||u_loc(N) - u_exact||_F = {worst:.2e} over N=0..4, "
            "XXZ and Bose-Hubbard, ohmic/Drude/reservoir (bound 1e-12)")


# A2 -------------------------------------------------------------------------

def test_a2_brute_force_oracle():
    worst = 0.0
    for L in (2, 3, 4):
        for bath in (BathSpec.ohmic(GAMMA, 2.2), BathSpec.drude(GAMMA, 2.2, 30.0)):
            system = xxz_two_bath(L=L, family=bath.family.value, E_D=bath.E_D)
            h = system.h_s
            hd = h.toarray()
            for ch in system.channels:
                vd = ch.v.toarray()
                for n in range(6):
                    for eps0 in (0.0, 2.0):
                        oracle = eigenbasis_taylor_u(hd, vd, ch.bath, eps0, taylor_weights(ch.bath, eps0, n))
                        worst = max(worst, np.abs(adhoc_u(h, ch.v, ch.bath, eps0, n).toarray() - oracle).max())
                    oracle = sum(eigenbasis_taylor_u(hd, p.op.toarray(), ch.bath, p.eps,
                                                     taylor_weights(ch.bath, p.eps, n))
                                 for p in ch.local_decomposition)
                    worst = max(worst, np.abs(local_u(h, ch, n).toarray() - oracle).max())
    verdict("A2", worst < 1e-10, f"max entry deviation nested commutators vs eigenbasis Taylor sum = {worst:.2e} "
            "(L=2..4, N=0..5, ohmic and Drude; bound 1e-10)")


# A3 -------------------------------------------------------------------------

def test_a3_thermalization(cache):
    system = cache.system(1.0, 2.2)
    rho = cache.state(Method.EXACT_REDFIELD, 0, 1.0, 2.2)
    d = trace_norm_distance(rho, gibbs_state(system.h_s, 2.2, system.eigen_cache))
    verdict("A3", d < 0.1, f"exact Redfield steady state vs Gibbs, L=6 T=2.2: d = {d:.3e} (bound 0.1)")


# A4 -------------------------------------------------------------------------

def relaxation_errors(T, orders, tau_r=1 / GAMMA, n_times=200):
    system = xxz_two_bath(L=6, T_l=T)
    rho0 = projector(build_initial_state(system.model.lattice, "x-polarized"))
    t = np.linspace(0.0, tau_r, n_times)
    exact = evolve(exact_redfield(system.h_s, system.channels), rho0, t, **TIGHT)
    errs = []
    for n in orders:
        snaps = evolve(build_generator(system, Method.LOCAL_REDFIELD, n), rho0, t, **TIGHT)
        errs.append(time_averaged_distance(exact, snaps, t, tau_r))
    return timescale_ratio(system), errs


def test_a4_error_scaling():
    temps = np.geomspace(2.2, 22.0, 5)
    orders = (0, 1, 2)
    ratios, errs = [], []
    for T in temps:
        r, e = relaxation_errors(T, orders)
        ratios.append(r)
        errs.append(e)
    errs = np.array(errs)
    slopes = [loglog_slope(ratios, errs[:, k]) for k in range(len(orders))]
    ok = all(abs(s - (n + 1)) <= 0.5 for n, s in zip(orders, slopes))
    detail = ", ".join(f"N={n}: {s:.3f} (target {n + 1}+-0.5)" for n, s in zip(orders, slopes))
    verdict("A4", ok, f"log-log slopes of d_tauR vs tau_B/tau_S over T in [2.2, 22]: {detail}")


# A5 -------------------------------------------------------------------------

def test_a5_monotone_order_improvement(cache):
    bad = []
    for J in (0.3, 1.0):
        for T in T_SWEEP:
            d1 = cache.error(Method.LOCAL_REDFIELD, 1, J, T)
            d4 = cache.error(Method.LOCAL_REDFIELD, 4, J, T)
            if not d4 <= d1:
                bad.append((J, T, d1, d4))
    J = 0.3
    local4 = cache.error(Method.LOCAL_REDFIELD, 4, J, 2.2)
    adhoc4 = cache.error(Method.ADHOC_REDFIELD, 4, J, 2.2, eps0=2 * J)
    local1 = cache.error(Method.LOCAL_REDFIELD, 1, J, 2.2)
    adhoc1 = cache.error(Method.ADHOC_REDFIELD, 1, J, 2.2, eps0=2 * J)
    gain = adhoc4 / local4
    ok = not bad and gain >= 10
    verdict("A5", ok, f"d(N=4) <= d(N=1) at all {2 * len(T_SWEEP)} points (violations: {bad}); "
            f"J=0.3 T=2.2 ad-hoc(eps0=2J)/local at N=4: {adhoc4:.2e}/{local4:.2e} = {gain:.1f}x (floor 10x); "
            f"at N=1 for reference: {adhoc1:.2e}/{local1:.2e} = {adhoc1 / local1:.1f}x")


# A6 -------------------------------------------------------------------------

def test_a6_local_lindblad_quality(cache):
    rows, ok = [], True
    for J in (0.3, 1.0):
        for T in T_SWEEP:
            d_new = cache.error(Method.LOCAL_LINDBLAD, 1, J, T)
            d_old = cache.error(Method.STANDARD_LOCAL_LINDBLAD, 0, J, T)
            ok &= d_new < d_old
            rows.append(f"J={J} T={T}: {d_new:.2e} < {d_old:.2e}")
    verdict("A6", ok, "local Lindblad N=1 vs traditional local Lindblad steady-state error; " + "; ".join(rows))


# A7 -------------------------------------------------------------------------

def test_a7_unphysical_current(cache):
    J, T = 1.0, 2.2
    model = cache.system(J, T).model
    bound = 1e-3 * 2 * J
    bulk = slice(1, model.L - 2)  # bonds whose sites carry no bath

    def max_bulk(method, order):
        return np.abs(bond_currents(model, cache.state(method, order, J, T))[bulk]).max()

    j_exact = max_bulk(Method.EXACT_REDFIELD, 0)
    j_local = max_bulk(Method.LOCAL_REDFIELD, 4)
    j_std = np.abs(bond_currents(model, cache.state(Method.STANDARD_LOCAL_LINDBLAD, 0, J, T))[bulk]).min()
    ok = j_exact < bound and j_local < bound and j_std > 10 * bound
    verdict("A7", ok, f"bulk |j|: exact {j_exact:.1e}, local Redfield N=4 {j_local:.1e} (bound {bound:.0e}); "
            f"traditional local Lindblad min bulk |j| {j_std:.3e} (needs > {10 * bound:.0e})")


# A8 -------------------------------------------------------------------------

def test_a8_complete_positivity():
    system = xxz_two_bath(L=6)
    rho0 = projector(build_initial_state(system.model.lattice, "x-polarized"))
    t = np.linspace(0.0, 40.0, 161)
    lows = {}
    for method, order, eps0 in ((Method.LOCAL_LINDBLAD, 1, None), (Method.LOCAL_LINDBLAD, 4, None),
                                (Method.ADHOC_LINDBLAD, 1, 0.0), (Method.ADHOC_LINDBLAD, 1, 2.0),
                                (Method.STANDARD_LOCAL_LINDBLAD, 0, None)):
        gen = build_generator(system, method, order, eps0)
        snaps = evolve(gen, rho0, t, **TIGHT) + [steady_state(gen, "nullspace")]
        lows[f"{method.value}:{order}" + ("" if eps0 is None else f":{eps0:g}")] = min(map(min_eigenvalue, snaps))
    sentinel = min_eigenvalue(steady_state(build_generator(system, Method.ADHOC_REDFIELD, 1, 0.0), "nullspace"))
    ok = all(v >= -1e-10 for v in lows.values()) and sentinel < -1e-10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in lows.items())
    verdict("A8", ok, f"min eigenvalue over relaxation + steady state: {detail} (bound -1e-10); "
            f"ad-hoc Redfield N=1 steady state min eigenvalue {sentinel:.3e} (must be negative)")


# A9 -------------------------------------------------------------------------

def test_a9_trajectory_consistency():
    system = xxz_two_bath(L=4)
    gen = local_lindblad_generator(system.h_s, system.channels, ExpansionPolicy(1))
    psi0 = build_initial_state(system.model.lattice, "x-polarized")
    times = np.linspace(0.8, 8.0, 10)
    cache = system.eigen_cache
    exact = np.array([eigenbasis_populations_coherences(r, cache)[0]
                      for r in evolve(gen, projector(psi0), times, **TIGHT)])
    obs = {"pop": EigenstatePopulations(cache[1])}
    small = mcwf_run(gen, psi0, TrajectoryConfig(2000, 1234, times), obs)
    large = mcwf_run(gen, psi0, TrajectoryConfig(4000, 1234, times), obs)
    z = np.abs(small.mean["pop"] - exact) / np.maximum(small.stderr["pop"], 1e-300)
    mad_ratio = np.abs(small.mean["pop"] - exact).mean() / np.abs(large.mean["pop"] - exact).mean()
    ok = z.max() <= 3 and 1.2 <= mad_ratio <= 1.7
    verdict("A9", ok, f"{z.size} population samples, max |z| = {z.max():.3f} (bound 3), "
            f"{np.mean(z > 2):.1%} beyond 2 sigma; MAD(2000)/MAD(4000) = {mad_ratio:.3f} (window [1.2, 1.7])")


# A10 ------------------------------------------------------------------------

def test_a10_bath_identities():
    ohmic = BathSpec.ohmic(GAMMA, 2.2)
    drude = BathSpec.drude(GAMMA, 2.2, 30.0)
    rng = np.random.default_rng(7)
    E = rng.uniform(0.05, 20.0, 20)
    kms = max(max(abs(np.real(f(b, -E)) / np.real(f(b, E)) / np.exp(E / b.T) - 1))
              for f, b in ((w_ohmic, ohmic), (w_drude, drude)))
    w0 = abs(w_ohmic(ohmic, 0.0) - GAMMA * 2.2)
    im0 = np.imag(w_drude(drude, 0.0))
    h = 1e-3
    f = [w_ohmic(ohmic, 2.0 + k * h) for k in (-2, -1, 1, 2)]
    fd = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
    fd_rel = abs(w_derivatives(ohmic, 2.0, 1)[1].real / fd - 1)
    bath = BathSpec.ohmic(GAMMA, 1.0)
    c = taylor_coefficients(bath, 0.0, 30).real

    def series_error(E, N):
        return abs(np.sum(c[: N + 1] * E ** np.arange(N + 1)) - w_ohmic(bath, E))

    radius = 2 * math.pi * bath.T
    inside = [series_error(0.8 * radius, N) for N in (10, 20, 30)]
    outside = [series_error(1.2 * radius, N) for N in (10, 20, 30)]
    straddle = inside[0] > inside[1] > inside[2] and outside[0] < outside[1] < outside[2]
    ok = kms < 1e-10 and w0 < 1e-15 and abs(im0 + 3.75) < 1e-9 and fd_rel < 1e-7 and straddle
    verdict("A10", ok, f"KMS rel. dev {kms:.1e}; |W(0) - gamma T| = {w0:.1e}; Im W_D(0) = {im0:.6f} (-3.75); "
            f"contour vs 5-point FD rel. dev {fd_rel:.1e} (1e-7); Taylor error at 0.8*2piT "
            f"{inside[0]:.1e}->{inside[2]:.1e}, at 1.2*2piT {outside[0]:.1e}->{outside[2]:.1e}")


# A11 ------------------------------------------------------------------------

def test_a11_nonequilibrium(cache):
    J, T_l = 1.0, 2.2
    d_neq = cache.error(Method.LOCAL_REDFIELD, 4, J, T_l, 3 * T_l)
    d_eq = cache.error(Method.LOCAL_REDFIELD, 4, J, T_l)
    model = cache.system(J, T_l, 3 * T_l).model
    j = bond_currents(model, cache.state(Method.LOCAL_REDFIELD, 4, J, T_l, 3 * T_l))
    spread = j.max() - j.min()
    ok = d_neq <= d_eq and abs(j.mean()) > 1e-4 and spread < 1e-6
    verdict("A11", ok, f"T_r=3T_l: d = {d_neq:.3e} vs equilibrium {d_eq:.3e}; "
            f"bond currents {np.array2string(j, precision=5)}, spread {spread:.1e} (bound 1e-6)")
