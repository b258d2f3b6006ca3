"""Exact Redfield generator, generic master-equation propagation and steady states.

Every generator here is stored in the common form

    d rho/dt = K rho + rho K^dag + sum_m (A_m rho B_m + B_m^dag rho A_m^dag),

which covers Redfield (K = -iH - sum v u, A = u, B = v) and Lindblad
(K = -iH - 1/2 sum L^dag L, A = L, B = L^dag / 2) equations alike.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .bath import BathSpec, SpectralKind, spectral_function
from .operators import (DENSE_CAP, DimensionError, SparseOperator, as_dense,
                        dense_diagonalize, hermitize)

logger = logging.getLogger(__name__)

DENSE_PROPAGATION_DIM = 1024
RTOL = 1e-8
ATOL = 1e-10


class IntegrationError(RuntimeError):
    pass


class SteadyStateError(RuntimeError):
    pass


def _mat(op):
    if isinstance(op, SparseOperator):
        return op.matrix
    return op


class Generator:
    """Linear master-equation generator in K / sandwich form."""

    def __init__(self, k_op, sandwiches: Sequence[tuple]):
        self._k = sp.csr_matrix(_mat(k_op), dtype=complex)
        self._sandwiches = [(sp.csr_matrix(_mat(a), dtype=complex), sp.csr_matrix(_mat(b), dtype=complex))
                            for a, b in sandwiches]
        self.dim = self._k.shape[0]
        for a, b in self._sandwiches:
            if a.shape != self._k.shape or b.shape != self._k.shape:
                raise DimensionError("generator operators must share one dimension")
        self._dense = None

    def _parts(self):
        if self.dim <= DENSE_PROPAGATION_DIM:
            if self._dense is None:
                self._dense = (self._k.toarray(),
                               [(a.toarray(), b.toarray()) for a, b in self._sandwiches])
            return self._dense
        return self._k, self._sandwiches

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Time derivative for an arbitrary (not necessarily Hermitian) matrix."""
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.dim, self.dim):
            raise DimensionError(f"density matrix shape {rho.shape} does not match dim {self.dim}")
        k, sand = self._parts()
        out = k @ rho + (k.conj() @ rho.T).T
        for a, b in sand:
            out = out + a @ (b.T @ rho.T).T + b.conj().T @ (a.conj() @ rho.T).T
        return np.asarray(out)

    def apply_hermitian(self, rho: np.ndarray) -> np.ndarray:
        """Time derivative for Hermitian input, returned exactly Hermitian."""
        k, sand = self._parts()
        y = k @ rho
        for a, b in sand:
            y = y + a @ (b.T @ rho.T).T
        y = np.asarray(y)
        return y + y.conj().T

    def liouvillian(self) -> sp.csr_matrix:
        """Sparse superoperator acting on row-major vec(rho)."""
        eye = sp.identity(self.dim, dtype=complex, format="csr")
        lv = sp.kron(self._k, eye) + sp.kron(eye, self._k.conj())
        for a, b in self._sandwiches:
            lv = lv + sp.kron(a, b.T) + sp.kron(b.conj().T, a.conj())
        return sp.csr_matrix(lv)

    def __call__(self, rho):
        return self.apply(rho)


class RedfieldGenerator(Generator):
    """-i[H_S, rho] + sum_j ([u_j rho, v_j] + h.c.)."""

    def __init__(self, h_s: SparseOperator, channels: Sequence[tuple], eigen_cache=None):
        self.h_s = h_s
        self.channels = tuple(channels)
        self.eigen_cache = eigen_cache
        h = _mat(h_s)
        k = -1j * h
        for u, v in self.channels:
            k = k - _mat(v) @ _mat(u)
        super().__init__(k, [(u, v) for u, v in self.channels])


class LindbladGenerator(Generator):
    """-i[H_eff, rho] + sum_m D_{L_m}[rho] with unit rates."""

    def __init__(self, h_eff: SparseOperator, jump_ops: Sequence[SparseOperator]):
        self.h_eff = h_eff
        self.jump_ops = tuple(jump_ops)
        k = -1j * _mat(h_eff)
        for L in self.jump_ops:
            Lm = _mat(L)
            k = k - 0.5 * (Lm.conj().T @ Lm)
        super().__init__(k, [(L, 0.5 * _mat(L).conj().T) for L in self.jump_ops])

    def nonhermitian_hamiltonian(self) -> sp.csr_matrix:
        return sp.csr_matrix(1j * self._k)


# exact jump operator -----------------------------------------------------------

def spectral_grid(evals: np.ndarray, vk: np.ndarray, bath: BathSpec,
                  kind: SpectralKind = SpectralKind.W) -> np.ndarray:
    """W(E_k - E_q) on the entries where the coupling matrix element is nonzero."""
    diff = evals[:, None] - evals[None, :]
    mask = np.abs(vk) > 1e-14 * max(np.abs(vk).max(), 1e-300)
    grid = np.zeros(diff.shape, dtype=complex)
    if mask.any():
        grid[mask] = spectral_function(bath, diff[mask], kind)
    return grid


def exact_u(h_s: SparseOperator, v: SparseOperator, bath: BathSpec,
            kind: SpectralKind = SpectralKind.W, eigen_cache=None) -> SparseOperator:
    """u = sum_kq |k><k|v|q><q| W(E_k - E_q) in the global eigenbasis."""
    if h_s.dim > DENSE_CAP:
        raise DimensionError(f"exact Redfield needs dim <= {DENSE_CAP}, got {h_s.dim}")
    evals, U = eigen_cache if eigen_cache is not None else dense_diagonalize(h_s)
    vk = U.conj().T @ as_dense(v) @ U
    u = U @ (vk * spectral_grid(evals, vk, bath, kind)) @ U.conj().T
    return SparseOperator(u, None)


def exact_redfield(model_or_h, channels) -> RedfieldGenerator:
    """Exact Redfield generator for a list of CouplingChannel objects."""
    h_s = getattr(model_or_h, "h_s", model_or_h)
    cache = dense_diagonalize(h_s)
    pairs = [(exact_u(h_s, ch.source, ch.bath, ch.kind, cache), ch.v) for ch in channels]
    return RedfieldGenerator(h_s, pairs, eigen_cache=cache)


def generator_apply(gen: Generator, rho: np.ndarray) -> np.ndarray:
    return gen.apply(rho)


# propagation -----------------------------------------------------------------

def evolve(gen: Generator, rho0: np.ndarray, t_grid: Sequence[float],
           rtol: float = RTOL, atol: float = ATOL, max_step: float = np.inf) -> list:
    """Adaptive Dormand-Prince 5(4) propagation; snapshots at ``t_grid``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a nonempty 1d sequence")
    if t_grid[0] < 0 or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be ascending and start at t >= 0")
    d = gen.dim
    rho0 = hermitize(np.asarray(rho0, dtype=complex))

    def rhs(_t, y):
        return gen.apply_hermitian(y.reshape(d, d)).ravel()

    if t_grid[-1] == t_grid[0]:
        return [rho0.copy() for _ in t_grid]
    t0 = min(0.0, t_grid[0]) if t_grid[0] > 0 else t_grid[0]
    sol = solve_ivp(rhs, (t0, t_grid[-1]), rho0.ravel(), method="RK45", t_eval=t_grid,
                    rtol=rtol, atol=atol, max_step=max_step)
    if sol.status != 0:
        raise IntegrationError(f"integration failed at t={sol.t[-1] if sol.t.size else t0}: "
                               f"{sol.message}; try loosening rtol/atol")
    out = [hermitize(sol.y[:, i].reshape(d, d)) for i in range(sol.y.shape[1])]
    drift = max(abs(np.trace(r) - 1.0) for r in out)
    if drift > 1e-12:
        logger.info("trace drift during propagation: %.3e", drift)
    return out


def residual(gen: Generator, rho: np.ndarray) -> float:
    return float(np.linalg.norm(gen.apply_hermitian(rho)) / np.linalg.norm(rho))


def _hermitian_real_system(gen: Generator):
    """Real d^2 x d^2 matrix of the generator restricted to Hermitian matrices.

    Parameters: Re rho_ij (i <= j) followed by Im rho_ij (i < j).
    """
    d = gen.dim
    iu, ju = np.triu_indices(d)
    is_, js = np.triu_indices(d, k=1)
    n_re, n_im = len(iu), len(is_)
    n = n_re + n_im
    # complex vec(rho) = P x
    rows, cols, vals = [], [], []
    for p, (i, j) in enumerate(zip(iu, ju)):
        rows.append(i * d + j); cols.append(p); vals.append(1.0)
        if i != j:
            rows.append(j * d + i); cols.append(p); vals.append(1.0)
    for p, (i, j) in enumerate(zip(is_, js)):
        rows.append(i * d + j); cols.append(n_re + p); vals.append(1j)
        rows.append(j * d + i); cols.append(n_re + p); vals.append(-1j)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(d * d, n), dtype=complex)
    LP = (gen.liouvillian() @ P).tocsr()
    M = np.empty((n, n))
    M[:n_re] = LP[iu * d + ju].toarray().real
    M[n_re:] = LP[is_ * d + js].toarray().imag
    return M, (iu, ju, is_, js)


def _unpack_hermitian(x: np.ndarray, d: int, idx) -> np.ndarray:
    iu, ju, is_, js = idx
    n_re = len(iu)
    rho = np.zeros((d, d), dtype=complex)
    rho[iu, ju] = x[:n_re]
    rho[is_, js] += 1j * x[n_re:]
    rho = rho + np.triu(rho, k=1).conj().T
    return rho


def steady_state_nullspace(gen: Generator, rcond_min: float = 1e-13) -> np.ndarray:
    """Null vector of the Liouvillian on Hermitian matrices, normalized to unit trace."""
    d = gen.dim
    M, idx = _hermitian_real_system(gen)
    iu, ju = idx[0], idx[1]
    # trace conservation makes the population equations dependent; swap one for Tr rho = 1
    M[0, :] = 0.0
    M[0, : len(iu)][iu == ju] = 1.0
    rhs = np.zeros(M.shape[0])
    rhs[0] = 1.0
    lu, piv, info = la.lapack.dgetrf(M)
    if info > 0:
        raise SteadyStateError("Liouvillian null space is degenerate (singular system)")
    anorm = np.abs(M).sum(axis=0).max()
    rc, _ = la.lapack.dgecon(lu, anorm, norm="1")
    if rc < rcond_min:
        raise SteadyStateError(f"steady state not unique: reciprocal condition number {rc:.2e}")
    x, _ = la.lapack.dgetrs(lu, piv, rhs)
    rho = _unpack_hermitian(x, d, idx)
    return rho / np.trace(rho)


def steady_state(gen: Generator, method: str = "propagate", tol: float = 1e-10,
                 t_initial: float = 10.0, t_max: float = 1e5,
                 rtol: float = 1e-11, atol: float = 1e-14) -> np.ndarray:
    """Stationary density matrix of ``gen``.

    ``propagate`` starts from the maximally mixed state and doubles the time
    horizon until ||L[rho]||_F < tol ||rho||_F; ``nullspace`` solves the
    linear stationarity problem directly (dim <= 64). The propagation uses
    tighter tolerances than ``evolve`` so the residual can reach ``tol``.
    """
    if method == "auto":
        method = "nullspace" if gen.dim <= 64 else "propagate"
    if method == "nullspace":
        if gen.dim > 64:
            raise DimensionError("null-space steady state is limited to dim <= 64")
        return steady_state_nullspace(gen)
    if method != "propagate":
        raise ValueError(f"unknown steady-state method {method!r}")
    rho = np.eye(gen.dim, dtype=complex) / gen.dim
    horizon = t_initial
    elapsed = 0.0
    while True:
        rho = evolve(gen, rho, [0.0, horizon], rtol=rtol, atol=atol)[-1]
        elapsed += horizon
        res = residual(gen, rho)
        if res < tol:
            logger.info("steady state reached after t=%.3g (residual %.2e)", elapsed, res)
            return rho / np.trace(rho)
        if elapsed >= t_max:
            raise SteadyStateError(f"no convergence up to t={elapsed:.3g}; residual {res:.2e}")
        horizon = min(2 * horizon, t_max - elapsed) if elapsed < t_max else horizon
