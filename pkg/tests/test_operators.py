import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import dense_kron
from localredfield.models import SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z, XxzSpec, xxz_chain
from localredfield.operators import (DimensionError, LatticeSpec, SparseOperator, commutator,
                                     dense_diagonalize, embed_site_operator, shifted_adjoint_apply)

I2 = np.eye(2)


def test_embed_single_site_sigma_z():
    op = embed_site_operator(LatticeSpec.spins(1), 0, SIGMA_Z)
    assert np.array_equal(op.toarray(), np.diag([1, -1]))


def test_embed_identity_is_identity_with_empty_support():
    lat = LatticeSpec.spins(3)
    op = embed_site_operator(lat, 1, I2)
    assert np.array_equal(op.toarray(), np.eye(8))
    assert op.support == frozenset()


@pytest.mark.parametrize("site", [0, 1, 2])
def test_embed_matches_kronecker_oracle(site):
    lat = LatticeSpec((2, 3, 2))
    rng = np.random.default_rng(site)
    d = lat.local_dims[site]
    local = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    ops = [np.eye(n) for n in lat.local_dims]
    ops[site] = local
    assert np.allclose(embed_site_operator(lat, site, local).toarray(), dense_kron(*ops), atol=0)


def test_embed_rejects_bad_site_and_shape():
    lat = LatticeSpec.spins(2)
    with pytest.raises(DimensionError):
        embed_site_operator(lat, 2, SIGMA_X)
    with pytest.raises(DimensionError):
        embed_site_operator(lat, 0, np.eye(3))


def test_lattice_dimension_cap():
    with pytest.raises(DimensionError):
        LatticeSpec.spins(30)


def test_self_commutator_vanishes():
    h = xxz_chain(XxzSpec(3)).h_s
    assert commutator(h, h).nnz == 0


def test_pauli_commutator():
    lat = LatticeSpec.spins(1)
    c = commutator(embed_site_operator(lat, 0, SIGMA_Z), embed_site_operator(lat, 0, SIGMA_X))
    assert np.allclose(c.toarray(), 2j * SIGMA_Y, atol=1e-15)


def test_commutator_matches_dense_oracle_with_support():
    model = xxz_chain(XxzSpec(3))
    sx0 = model.site_op(0, SIGMA_X)
    c = commutator(model.h_s, sx0)
    h, x = model.h_s.toarray(), sx0.toarray()
    assert np.max(np.abs(c.toarray() - (h @ x - x @ h))) < 1e-13
    # only the first bond and the first field touch site 0
    assert c.support == frozenset({0, 1})


def test_shifted_adjoint_in_eigenbasis():
    model = xxz_chain(XxzSpec(3, J=0.8))
    E, U = dense_diagonalize(model.h_s)
    k, q = 2, 5
    x = SparseOperator(np.outer(U[:, k], U[:, q].conj()), None)
    out = shifted_adjoint_apply(model.h_s, 0.0, x)
    assert np.allclose(out.toarray(), (E[k] - E[q]) * x.toarray(), atol=1e-12)


def test_shifted_adjoint_commuting_and_local_cancellation():
    lat = LatticeSpec.spins(1)
    h1 = 0.9
    h = embed_site_operator(lat, 0, h1 * SIGMA_Z)
    assert shifted_adjoint_apply(h, 0.0, h).nnz == 0
    sp_ = embed_site_operator(lat, 0, SIGMA_PLUS)
    assert shifted_adjoint_apply(h, 2 * h1, sp_).nnz == 0
    sm = embed_site_operator(lat, 0, SIGMA_MINUS)
    assert shifted_adjoint_apply(h, -2 * h1, sm).nnz == 0


def test_diagonalize_two_level_and_xx_dimer():
    E, _ = dense_diagonalize(embed_site_operator(LatticeSpec.spins(1), 0, 1.3 * SIGMA_Z))
    assert np.allclose(E, [-1.3, 1.3])
    E, _ = dense_diagonalize(xxz_chain(XxzSpec(2, J=1.0, Delta=0.0, h=0.0, delta=0.0)).h_s)
    assert np.allclose(E, [-2, 0, 0, 2], atol=1e-13)


def test_diagonalize_reconstruction_l6():
    h = xxz_chain(XxzSpec(6)).h_s
    E, U = dense_diagonalize(h)
    m = h.toarray()
    assert np.linalg.norm(m - (U * E) @ U.conj().T) / np.linalg.norm(m) < 1e-10


def test_diagonalize_cap():
    with pytest.raises(DimensionError):
        dense_diagonalize(xxz_chain(XxzSpec(4)).h_s, cap=8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_commutator_is_antisymmetric_and_matches_dense(seed):
    rng = np.random.default_rng(seed)
    lat = LatticeSpec.spins(3)
    a = embed_site_operator(lat, int(rng.integers(3)), rng.normal(size=(2, 2)))
    b = SparseOperator(rng.normal(size=(8, 8)) * (rng.random((8, 8)) < 0.3), None)
    ab = commutator(a, b).toarray()
    assert np.allclose(ab, -commutator(b, a).toarray(), atol=1e-13)
    A, B = a.toarray(), b.toarray()
    assert np.allclose(ab, A @ B - B @ A, atol=1e-13)
