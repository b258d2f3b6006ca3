"""Shared dense oracles for the test suite."""

import numpy as np
import pytest

from localredfield.bath import SpectralKind, spectral_function


def dense_kron(*ops):
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def eigenbasis_taylor_u(h, v, bath, eps0, coeffs, kind=SpectralKind.W):
    """sum_n c_n (E_k - E_q - eps0)^n <k|v|q> rebuilt in the eigenbasis."""
    evals, U = np.linalg.eigh(h)
    vk = U.conj().T @ v @ U
    x = evals[:, None] - evals[None, :] - eps0
    poly = sum(c * x**n for n, c in enumerate(coeffs))
    return U @ (vk * poly) @ U.conj().T


def exact_u_oracle(h, v, bath, kind=SpectralKind.W):
    evals, U = np.linalg.eigh(h)
    vk = U.conj().T @ v @ U
    grid = np.asarray(spectral_function(bath, (evals[:, None] - evals[None, :]).ravel(), kind))
    return U @ (vk * grid.reshape(vk.shape)) @ U.conj().T


def liouvillian_oracle(h, pairs):
    """Column-by-column superoperator of -i[H, rho] + sum([u rho, v] + h.c.)."""
    d = h.shape[0]
    cols = []
    for idx in range(d * d):
        rho = np.zeros(d * d, dtype=complex)
        rho[idx] = 1.0
        rho = rho.reshape(d, d)
        out = -1j * (h @ rho - rho @ h)
        for u, v in pairs:
            # linear extension of [u rho, v] + h.c. off the Hermitian subspace
            out = out + u @ rho @ v - v @ u @ rho
            out = out + v.conj().T @ rho @ u.conj().T - rho @ u.conj().T @ v.conj().T
        cols.append(out.ravel())
    return np.array(cols).T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = []  # one "A<n> PASS/FAIL: ..." line per acceptance criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
