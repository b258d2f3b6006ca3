"""Sparse operator algebra on tensor-product Hilbert spaces.

Basis convention: site 0 is the leftmost (most significant) tensor factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

DROP_TOL = 1e-14
DENSE_CAP = 4096
MAX_DIM = 2**20


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    """Chain of ``len(local_dims)`` sites with the given local Hilbert dimensions."""

    local_dims: tuple
    max_dim: int = MAX_DIM

    def __post_init__(self):
        dims = tuple(int(d) for d in self.local_dims)
        object.__setattr__(self, "local_dims", dims)
        if len(dims) < 1:
            raise DimensionError("lattice needs at least one site")
        if any(d < 2 for d in dims):
            raise DimensionError(f"local dimensions must be >= 2, got {dims}")
        if self.dim > self.max_dim:
            raise DimensionError(f"Hilbert dimension {self.dim} exceeds cap {self.max_dim}")

    @classmethod
    def spins(cls, num_sites: int, **kw) -> "LatticeSpec":
        return cls((2,) * num_sites, **kw)

    @classmethod
    def bosons(cls, num_sites: int, n_cut: int, **kw) -> "LatticeSpec":
        return cls((n_cut + 1,) * num_sites, **kw)

    @property
    def num_sites(self) -> int:
        return len(self.local_dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.local_dims, dtype=np.int64))


def _max_abs(m) -> float:
    if sp.issparse(m):
        return float(np.abs(m.data).max()) if m.nnz else 0.0
    return float(np.abs(m).max()) if m.size else 0.0


def _prune(m, scale: float):
    m = sp.csr_matrix(m, dtype=complex)
    m.sum_duplicates()
    if m.nnz and scale > 0:
        small = np.abs(m.data) < DROP_TOL * scale
        if small.any():
            m.data[small] = 0.0
            m.eliminate_zeros()
    return m


def _union(a: Optional[frozenset], b: Optional[frozenset]) -> Optional[frozenset]:
    if a is None or b is None:
        return None
    return a | b


def _overlap(a: Optional[frozenset], b: Optional[frozenset]) -> bool:
    if a is None or b is None:
        return True
    return bool(a & b)


class SparseOperator:
    """Immutable complex sparse matrix with site-support metadata.

    ``support`` is the set of sites the operator acts on nontrivially; ``None``
    means unknown (treated as the whole chain). Operators built as a sum of
    local pieces keep those pieces in ``terms``, which lets commutators skip
    pieces that act on disjoint sites.
    """

    __slots__ = ("_m", "_support", "_terms", "_hermitian")

    def __init__(self, matrix, support: Optional[Iterable[int]] = None, *,
                 terms: tuple = (), hermitian: bool = False, scale: Optional[float] = None):
        m = sp.csr_matrix(matrix, dtype=complex)
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator must be square, got {m.shape}")
        m = _prune(m, _max_abs(m) if scale is None else scale)
        self._m = m
        self._support = None if support is None else frozenset(int(s) for s in support)
        self._terms = tuple(terms)
        self._hermitian = bool(hermitian)
        if hermitian:
            d = m - m.getH()
            if d.nnz and _max_abs(d) > 1e-12 * max(_max_abs(m), 1.0):
                raise ValueError("operator flagged Hermitian but is not")

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, dim: int) -> "SparseOperator":
        return cls(sp.csr_matrix((dim, dim), dtype=complex), support=())

    @classmethod
    def identity(cls, dim: int) -> "SparseOperator":
        return cls(sp.identity(dim, dtype=complex, format="csr"), support=(), hermitian=True)

    @classmethod
    def local_sum(cls, terms: Iterable["SparseOperator"], hermitian: bool = False) -> "SparseOperator":
        """Sum of local operators that remembers its pieces."""
        terms = tuple(t for t in terms if t.nnz)
        if not terms:
            raise ValueError("local_sum needs at least one nonzero term")
        total = reduce(lambda x, y: x + y, (t.matrix for t in terms))
        support = reduce(_union, (t.support for t in terms))
        return cls(total, support, terms=terms, hermitian=hermitian)

    # properties -----------------------------------------------------------
    @property
    def matrix(self) -> sp.csr_matrix:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @property
    def support(self) -> Optional[frozenset]:
        return self._support

    @property
    def terms(self) -> tuple:
        return self._terms

    @property
    def hermitian(self) -> bool:
        return self._hermitian

    @property
    def nnz(self) -> int:
        return self._m.nnz

    def toarray(self) -> np.ndarray:
        return self._m.toarray()

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.sqrt(np.sum(np.abs(self._m.data) ** 2)))

    def max_abs(self) -> float:
        return _max_abs(self._m)

    def dag(self) -> "SparseOperator":
        return SparseOperator(self._m.getH(), self._support,
                              terms=tuple(t.dag() for t in self._terms), hermitian=self._hermitian)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        d = self._m - self._m.getH()
        return not d.nnz or _max_abs(d) <= tol * max(self.max_abs(), 1.0)

    # arithmetic -----------------------------------------------------------
    def _check(self, other: "SparseOperator"):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        scale = max(self.max_abs(), other.max_abs())
        return SparseOperator(self._m + other._m, _union(self._support, other._support),
                              hermitian=self._hermitian and other._hermitian, scale=scale)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        scale = max(self.max_abs(), other.max_abs())
        return SparseOperator(self._m - other._m, _union(self._support, other._support),
                              hermitian=self._hermitian and other._hermitian, scale=scale)

    def __neg__(self):
        return -1.0 * self

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        herm = self._hermitian and np.isreal(c)
        return SparseOperator(self._m * c, self._support,
                              terms=tuple(t * c for t in self._terms), hermitian=herm)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        prod = self._m @ other._m
        return SparseOperator(prod, _union(self._support, other._support))

    def __repr__(self):
        sup = "all" if self._support is None else sorted(self._support)
        return f"SparseOperator(dim={self.dim}, nnz={self.nnz}, support={sup})"


def embed_site_operator(lattice: LatticeSpec, site: int, local_op) -> SparseOperator:
    """Kronecker embedding I ⊗ ... ⊗ local_op ⊗ ... ⊗ I at ``site``."""
    if not 0 <= site < lattice.num_sites:
        raise DimensionError(f"site {site} out of range for {lattice.num_sites} sites")
    op = np.asarray(local_op, dtype=complex)
    d = lattice.local_dims[site]
    if op.shape != (d, d):
        raise DimensionError(f"local operator shape {op.shape} does not match local dim {d}")
    left = int(np.prod(lattice.local_dims[:site], dtype=np.int64))
    right = int(np.prod(lattice.local_dims[site + 1:], dtype=np.int64))
    m = sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(op), format="csr")
    m = sp.kron(m, sp.identity(right, format="csr"), format="csr")
    is_identity = np.allclose(op, op[0, 0] * np.eye(d), atol=0.0)
    herm = bool(np.allclose(op, op.conj().T, atol=0.0))
    return SparseOperator(m, () if is_identity else (site,), hermitian=herm)


def _commutator_parts(a: SparseOperator, b: SparseOperator):
    """Return (matrix, scale, support) of [a, b] without pruning."""
    if a.terms:
        pieces = [t for t in a.terms if _overlap(t.support, b.support)]
    else:
        pieces = [a] if _overlap(a.support, b.support) else []
    out = sp.csr_matrix((a.dim, a.dim), dtype=complex)
    scale = 0.0
    support: Optional[frozenset] = frozenset()
    for t in pieces:
        if t.terms:
            m, s, sup = _commutator_parts(t, b)
        else:
            ab = t.matrix @ b.matrix
            ba = b.matrix @ t.matrix
            m = ab - ba
            s = max(_max_abs(ab), _max_abs(ba))
            sup = _union(t.support, b.support)
        out = out + m
        scale = max(scale, s)
        support = _union(support, sup)
    return out, scale, support


def commutator(a: SparseOperator, b: SparseOperator) -> SparseOperator:
    """[a, b] = ab - ba, with relative drop tolerance applied."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if b.terms and not a.terms:
        m, scale, support = _commutator_parts(b, a)
        return SparseOperator(-m, support, scale=scale)
    m, scale, support = _commutator_parts(a, b)
    return SparseOperator(m, support, scale=scale)


def shifted_adjoint_apply(h: SparseOperator, eps: float, x: SparseOperator) -> SparseOperator:
    """One application of the shifted adjoint map: [h, x] - eps * x."""
    if h.dim != x.dim:
        raise DimensionError(f"dimension mismatch: {h.dim} vs {x.dim}")
    m, scale, support = _commutator_parts(h, x)
    if eps != 0.0:
        m = m - eps * x.matrix
        scale = max(scale, abs(eps) * x.max_abs())
        support = _union(support, x.support)
    return SparseOperator(m, support, scale=scale)


def dense_diagonalize(h: SparseOperator, cap: int = DENSE_CAP):
    """Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian operator."""
    if h.dim > cap:
        raise DimensionError(f"dimension {h.dim} exceeds dense cap {cap}")
    if not h.is_hermitian():
        raise ValueError("dense_diagonalize requires a Hermitian operator")
    evals, evecs = la.eigh(h.toarray())
    return evals, evecs


def as_dense(op) -> np.ndarray:
    if isinstance(op, SparseOperator):
        return op.toarray()
    if sp.issparse(op):
        return op.toarray()
    return np.asarray(op, dtype=complex)


# density matrices --------------------------------------------------------

def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def check_density_matrix(rho: np.ndarray, trace_tol: float = 1e-9, herm_tol: float = 1e-10) -> None:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr} deviates from 1")
    if np.linalg.norm(rho - rho.conj().T) > herm_tol:
        raise ValueError("density matrix is not Hermitian")


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())
