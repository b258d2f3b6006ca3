"""Monte-Carlo wave-function unraveling of Lindblad generators.

Between jumps a trajectory follows the non-Hermitian Hamiltonian
H_nh = H_eff - (i/2) sum_m L_m^dag L_m. A jump happens when the squared norm
drops below a uniform random number; the jump time is located by bisection
on the dense output of the Runge-Kutta step.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import RK45

from .operators import SparseOperator
from .redfield import IntegrationError, LindbladGenerator

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class TrajectoryConfig:
    n_traj: int
    seed: int
    t_grid: tuple
    dt_max: float = math.inf
    jump_tol: float = 1e-8
    refine_jumps: bool = True
    rtol: float = 1e-8
    atol: float = 1e-10
    record_jumps: bool = False

    def __post_init__(self):
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if not self.t_grid:
            raise ValueError("t_grid must not be empty")
        if self.t_grid[0] < 0 or any(b < a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ValueError("t_grid must be ascending and nonnegative")
        if not self.refine_jumps and not math.isfinite(self.dt_max):
            raise ValueError("first-order jumps (refine_jumps=False) need a finite dt_max")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class EnsembleResult:
    """Mean and standard error (sample std / sqrt(n)) per observable and time."""

    t_grid: np.ndarray
    mean: dict
    stderr: dict
    n_traj: int
    jump_logs: Optional[list] = None

    def write_jump_log(self, path) -> None:
        with open(path, "w") as fh:
            for traj, t, ch in self.jump_logs or []:
                fh.write(json.dumps({"trajectory": traj, "time": t, "channel": ch}) + "\n")


class EigenstatePopulations:
    """|<k|psi>|^2 for the columns of an eigenvector matrix (picklable observable)."""

    def __init__(self, eigenvectors: np.ndarray):
        self.U = np.asarray(eigenvectors)

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        return np.abs(self.U.conj().T @ psi) ** 2


def sample_observable(psi: np.ndarray, obs) -> float:
    """<psi|obs|psi>/<psi|psi> for a Hermitian observable."""
    m = obs.matrix if isinstance(obs, SparseOperator) else obs
    if isinstance(obs, SparseOperator) and not obs.is_hermitian():
        raise ValueError("observable must be Hermitian")
    if not isinstance(obs, SparseOperator) and not sp.issparse(m):
        m = np.asarray(m)
        if not np.allclose(m, m.conj().T, atol=1e-12):
            raise ValueError("observable must be Hermitian")
    val = np.vdot(psi, m @ psi) / np.vdot(psi, psi)
    assert abs(val.imag) < 1e-10 * max(1.0, abs(val.real)), "imaginary expectation value"
    return float(val.real)


def _evaluate(observables: Mapping, psi: np.ndarray) -> list:
    psi = psi / np.linalg.norm(psi)
    out = []
    for obs in observables.values():
        if callable(obs) and not isinstance(obs, (SparseOperator, np.ndarray)) and not sp.issparse(obs):
            out.append(np.atleast_1d(np.asarray(obs(psi), dtype=float)))
        else:
            m = obs.matrix if isinstance(obs, SparseOperator) else obs
            out.append(np.array([np.real(np.vdot(psi, m @ psi))]))
    return out


class _Unraveling:
    """Everything one trajectory needs; shared read-only between trajectories."""

    def __init__(self, gen: LindbladGenerator, cfg: TrajectoryConfig, observables: Mapping):
        self.jumps = [sp.csr_matrix(L.matrix if isinstance(L, SparseOperator) else L) for L in gen.jump_ops]
        h = gen.h_eff.matrix if isinstance(gen.h_eff, SparseOperator) else sp.csr_matrix(gen.h_eff)
        decay = sp.csr_matrix(h.shape, dtype=complex)
        for L in self.jumps:
            decay = decay + L.getH() @ L
        self.mat = sp.csr_matrix(-1j * (h - 0.5j * decay))
        if self.mat.shape[0] <= 1024:
            self.mat = self.mat.toarray()
        self.cfg = cfg
        self.observables = dict(observables)
        self.grid = np.asarray(cfg.t_grid)

    def rhs(self, _t, y):
        return self.mat @ y

    def _solver(self, t0, psi):
        return RK45(self.rhs, t0, psi, self.grid[-1], rtol=self.cfg.rtol, atol=self.cfg.atol,
                    max_step=self.cfg.dt_max, vectorized=False)

    def _bisect(self, dense, lo, hi, r):
        tol = self.cfg.jump_tol
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            y = dense(mid)
            if np.vdot(y, y).real > r:
                lo = mid
            else:
                hi = mid
        return hi

    def run(self, index: int, psi0: np.ndarray):
        cfg = self.cfg
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))
        grid = self.grid
        samples = [None] * len(grid)
        log = []
        gi = 0
        psi = np.asarray(psi0, dtype=complex).copy()
        t = 0.0
        while gi < len(grid) and grid[gi] <= t:
            samples[gi] = _evaluate(self.observables, psi)
            gi += 1
        r = rng.random()
        solver = self._solver(t, psi) if gi < len(grid) else None
        while gi < len(grid):
            msg = solver.step()
            if solver.status == "failed":
                raise IntegrationError(f"trajectory {index}: {msg}")
            t_old, t_new = solver.t_old, solver.t
            dense = solver.dense_output()
            y = solver.y
            norm2 = np.vdot(y, y).real
            if norm2 < NORM_FLOOR and norm2 > r:
                raise IntegrationError(f"trajectory {index}: norm collapsed at t={t_new}")
            jump = norm2 <= r
            t_jump = (self._bisect(dense, t_old, t_new, r) if cfg.refine_jumps else t_new) if jump else t_new
            while gi < len(grid) and grid[gi] <= t_jump:
                samples[gi] = _evaluate(self.observables, dense(grid[gi]) if grid[gi] < t_new else y)
                gi += 1
            if not jump:
                if solver.status == "finished":
                    break
                continue
            psi = dense(t_jump) if t_jump < t_new else y
            weights = np.array([np.linalg.norm(L @ psi) ** 2 for L in self.jumps])
            total = weights.sum()
            if not total > 0:
                raise IntegrationError(f"trajectory {index}: jump with vanishing rates at t={t_jump}")
            m = int(np.searchsorted(np.cumsum(weights) / total, rng.random(), side="right"))
            m = min(m, len(self.jumps) - 1)
            psi = self.jumps[m] @ psi
            psi /= np.linalg.norm(psi)
            if cfg.record_jumps:
                log.append((index, float(t_jump), m))
            r = rng.random()
            t = t_jump
            if gi < len(grid):
                solver = self._solver(t, psi)
        while gi < len(grid):
            # final grid point equal to the integration bound
            samples[gi] = _evaluate(self.observables, solver.y)
            gi += 1
        return samples, log


def _run_chunk(unr: _Unraveling, indices, psi0):
    return [unr.run(i, psi0) for i in indices]


def mcwf_run(gen: LindbladGenerator, psi0: np.ndarray, cfg: TrajectoryConfig,
             observables: Mapping, threads: int = 1) -> EnsembleResult:
    """Ensemble average of ``observables`` over ``cfg.n_traj`` trajectories.

    Results depend only on (seed, n_traj) and are reduced in trajectory order,
    so the number of worker processes does not change them.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    if not observables:
        raise ValueError("need at least one observable")
    unr = _Unraveling(gen, cfg, observables)
    indices = list(range(cfg.n_traj))
    if threads > 1 and cfg.n_traj > 1:
        chunks = [indices[k::threads] for k in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, [unr] * len(chunks), chunks, [psi0] * len(chunks)))
        by_index = {}
        for chunk, res in zip(chunks, parts):
            by_index.update(zip(chunk, res))
        results = [by_index[i] for i in indices]
    else:
        results = [unr.run(i, psi0) for i in indices]

    names = list(observables)
    n_t = len(cfg.t_grid)
    # Welford accumulation in trajectory order
    count = 0
    mean = [np.zeros((n_t, len(results[0][0][0][k]))) for k in range(len(names))]
    m2 = [np.zeros_like(a) for a in mean]
    logs = []
    for samples, log in results:
        count += 1
        for k in range(len(names)):
            x = np.array([s[k] for s in samples])
            delta = x - mean[k]
            mean[k] += delta / count
            m2[k] += delta * (x - mean[k])
        logs.extend(log)
    out_mean, out_err = {}, {}
    for k, name in enumerate(names):
        err = np.sqrt(m2[k] / (count - 1) / count) if count > 1 else np.full_like(mean[k], np.nan)
        squeeze = mean[k].shape[1] == 1
        out_mean[name] = mean[k][:, 0] if squeeze else mean[k]
        out_err[name] = err[:, 0] if squeeze else err
    return EnsembleResult(np.asarray(cfg.t_grid), out_mean, out_err, count,
                          logs if cfg.record_jumps else None)
