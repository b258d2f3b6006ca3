"""Observables and error measures for density-matrix and trajectory results."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .operators import DimensionError, SparseOperator, as_dense, commutator, dense_diagonalize


def trace_norm_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    """Tr sqrt(A^dag A) of A = rho1 - rho2, i.e. the sum of |eigenvalues|.

    No factor 1/2: orthogonal pure states are at distance 2.
    """
    rho1, rho2 = np.asarray(rho1), np.asarray(rho2)
    if rho1.shape != rho2.shape:
        raise DimensionError(f"shape mismatch {rho1.shape} vs {rho2.shape}")
    diff = rho1 - rho2
    diff = 0.5 * (diff + diff.conj().T)
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def gibbs_state(h_s: SparseOperator, T: float, eigen_cache=None) -> np.ndarray:
    """exp(-H/T)/Z built in the eigenbasis."""
    if not T > 0:
        raise ValueError("temperature must be positive")
    evals, U = eigen_cache if eigen_cache is not None else dense_diagonalize(h_s)
    p = np.exp(-(evals - evals.min()) / T)
    p /= p.sum()
    return (U * p) @ U.conj().T


def expectation(rho: np.ndarray, obs) -> float:
    val = np.trace(as_dense(obs) @ rho) if not isinstance(obs, SparseOperator) \
        else np.sum(obs.matrix.multiply(np.asarray(rho).T))
    return float(np.real(val))


def current_operator(bond_term: SparseOperator, sz_i: SparseOperator) -> SparseOperator:
    """Hermitian operator -i[H_bond, sigma^z_i] whose expectation is the bond current."""
    return -1j * commutator(bond_term, sz_i)


def magnetization_current(bond_term: SparseOperator, sz_i: SparseOperator, rho: np.ndarray) -> float:
    """j_i = -i Tr(rho [H_bond, sigma^z_i]) for the bond (i, i+1)."""
    val = np.sum(current_operator(bond_term, sz_i).matrix.multiply(np.asarray(rho).T))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ValueError(f"current has an imaginary part {val.imag:.2e}; rho not Hermitian?")
    return float(val.real)


def bond_currents(model, rho: np.ndarray) -> np.ndarray:
    """Currents on all bonds of a chain model; sigma^z (or n) is the conserved density."""
    dens = model.number_like()
    return np.array([magnetization_current(b, model.site_op(i, dens), rho)
                     for i, b in enumerate(model.bond_terms)])


def site_densities(model, rho: np.ndarray) -> np.ndarray:
    dens = model.number_like()
    return np.array([expectation(rho, model.site_op(i, dens)) for i in range(model.L)])


def eigenbasis_populations_coherences(rho: np.ndarray, eigen_cache) -> tuple:
    """Populations rho_kk and neighbour coherences rho_{k,k+1}, ascending energy."""
    if eigen_cache is None:
        raise ValueError("eigenbasis populations need an eigen cache (E, U)")
    _, U = eigen_cache
    r = U.conj().T @ np.asarray(rho) @ U
    return np.real(np.diag(r)).copy(), np.diag(r, k=1).copy()


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (rho + np.asarray(rho).conj().T))[0])


def time_averaged_distance(traj_a: Sequence[np.ndarray], traj_b: Sequence[np.ndarray],
                           t_grid: Sequence[float], t_max: float,
                           t_grid_b: Optional[Sequence[float]] = None) -> float:
    """Mean trace distance over the snapshots with t <= t_max."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid_b is not None and not np.array_equal(t_grid, np.asarray(t_grid_b, dtype=float)):
        raise ValueError("both trajectories must share one time grid")
    if len(traj_a) != len(t_grid) or len(traj_b) != len(t_grid):
        raise ValueError("snapshot count does not match the time grid")
    sel = np.nonzero(t_grid <= t_max * (1 + 1e-12))[0]
    if sel.size == 0:
        raise ValueError("no snapshots inside [0, t_max]")
    return float(np.mean([trace_norm_distance(traj_a[i], traj_b[i]) for i in sel]))
