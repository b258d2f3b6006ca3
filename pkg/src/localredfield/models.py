"""Benchmark chains (boundary-driven XXZ, Bose-Hubbard with trap) and their bath couplings.

Sites are 0-based internally. Spin basis order is (up, down); boson basis is
(0, 1, ..., n_cut).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bath import BathFamily, BathSpec, SpectralKind, spectral_function
from .operators import LatticeSpec, SparseOperator, embed_site_operator

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |up><down|
SIGMA_MINUS = SIGMA_PLUS.T.copy()

EPS_MERGE = 1e-12


def boson_ops(n_cut: int):
    """Truncated annihilation, creation and number operators."""
    a = np.diag(np.sqrt(np.arange(1, n_cut + 1)), k=1).astype(complex)
    return a, a.conj().T.copy(), np.diag(np.arange(n_cut + 1)).astype(complex)


@dataclass(frozen=True)
class XxzSpec:
    L: int
    J: float = 1.0
    Delta: float = 0.7
    h: float = 1.0
    delta: float = -0.07

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("XXZ chain needs L >= 2")

    def field(self, i: int) -> float:
        """Local field h_i; i is 0-based, so the first site carries h."""
        return self.h + i * self.delta


@dataclass(frozen=True)
class BoseHubbardSpec:
    L: int
    J: float = 1.0
    U: float = 0.5
    trap: float = 0.35
    n_cut: int = 2
    V: Optional[tuple] = None

    def __post_init__(self):
        if self.n_cut < 1:
            raise ValueError("boson cutoff n_cut must be >= 1")
        if self.V is not None and len(self.V) != self.L:
            raise ValueError("explicit trap potential needs one value per site")

    def potential(self, i: int) -> float:
        # trap centred with 1-based site labels: V_i = trap (i - L/2)^2 J
        if self.V is not None:
            return float(self.V[i])
        return self.trap * (i + 1 - self.L / 2) ** 2 * self.J

    def site_hamiltonian(self, i: int) -> np.ndarray:
        n = np.arange(self.n_cut + 1)
        return np.diag(self.U / 2 * n * (n + 1) + self.potential(i) * n).astype(complex)


@dataclass(frozen=True)
class ChainModel:
    """System Hamiltonian with its on-site pieces and nearest-neighbour bond terms."""

    kind: str
    spec: object
    lattice: LatticeSpec
    h_s: SparseOperator
    site_hamiltonians: tuple
    bond_terms: tuple

    @property
    def L(self) -> int:
        return self.lattice.num_sites

    def site_op(self, site: int, local_op) -> SparseOperator:
        return embed_site_operator(self.lattice, site, local_op)

    def lowering(self) -> np.ndarray:
        if self.kind == "xxz":
            return SIGMA_MINUS
        return boson_ops(self.spec.n_cut)[0]

    def number_like(self) -> np.ndarray:
        """Local conserved density: sigma^z for spins, n for bosons."""
        if self.kind == "xxz":
            return SIGMA_Z
        return boson_ops(self.spec.n_cut)[2]


def _check_lattice(lattice: Optional[LatticeSpec], expected: LatticeSpec) -> LatticeSpec:
    if lattice is None:
        return expected
    if lattice.local_dims != expected.local_dims:
        raise ValueError(f"lattice {lattice.local_dims} does not match model {expected.local_dims}")
    return lattice


def xxz_chain(spec: XxzSpec, lattice: Optional[LatticeSpec] = None) -> ChainModel:
    lattice = _check_lattice(lattice, LatticeSpec.spins(spec.L))
    sx = [embed_site_operator(lattice, i, SIGMA_X) for i in range(spec.L)]
    sy = [embed_site_operator(lattice, i, SIGMA_Y) for i in range(spec.L)]
    sz = [embed_site_operator(lattice, i, SIGMA_Z) for i in range(spec.L)]
    bonds = []
    for i in range(spec.L - 1):
        b = -spec.J * (sx[i] @ sx[i + 1] + sy[i] @ sy[i + 1] + spec.Delta * (sz[i] @ sz[i + 1]))
        bonds.append(SparseOperator(b.matrix, (i, i + 1), hermitian=True))
    site_h = tuple(spec.field(i) * SIGMA_Z for i in range(spec.L))
    onsite = [spec.field(i) * sz[i] for i in range(spec.L)]
    h_s = SparseOperator.local_sum(bonds + onsite, hermitian=True)
    return ChainModel("xxz", spec, lattice, h_s, site_h, tuple(bonds))


def bose_hubbard_chain(spec: BoseHubbardSpec, lattice: Optional[LatticeSpec] = None) -> ChainModel:
    lattice = _check_lattice(lattice, LatticeSpec.bosons(spec.L, spec.n_cut))
    a, adag, _ = boson_ops(spec.n_cut)
    an = [embed_site_operator(lattice, i, a) for i in range(spec.L)]
    cr = [embed_site_operator(lattice, i, adag) for i in range(spec.L)]
    bonds = []
    for i in range(spec.L - 1):
        b = -spec.J * (cr[i + 1] @ an[i] + cr[i] @ an[i + 1])
        bonds.append(SparseOperator(b.matrix, (i, i + 1), hermitian=True))
    site_h = tuple(spec.site_hamiltonian(i) for i in range(spec.L))
    onsite = [embed_site_operator(lattice, i, site_h[i]) for i in range(spec.L)]
    h_s = SparseOperator.local_sum(bonds + onsite, hermitian=True)
    return ChainModel("bose-hubbard", spec, lattice, h_s, site_h, tuple(bonds))


def build_xxz(spec: XxzSpec, lattice: Optional[LatticeSpec] = None) -> SparseOperator:
    return xxz_chain(spec, lattice).h_s


def build_bose_hubbard(spec: BoseHubbardSpec, lattice: Optional[LatticeSpec] = None) -> SparseOperator:
    return bose_hubbard_chain(spec, lattice).h_s


# local spectral decomposition ------------------------------------------------

@dataclass(frozen=True)
class LocalPiece:
    """Projected piece |k><k| v |q><q| (degenerate transition energies merged).

    ``elements`` keeps, for every merged (k, q) pair, the local matrix element
    <k|v|q> and the local energy E_q used for thermal weights.
    """

    op: SparseOperator
    eps: float
    elements: tuple


def _local_matrix(v: SparseOperator, lattice: LatticeSpec, site: int) -> np.ndarray:
    d = lattice.local_dims[site]
    right = int(np.prod(lattice.local_dims[site + 1:], dtype=np.int64))
    idx = np.arange(d) * right
    return v.matrix[idx][:, idx].toarray()


def local_decompose(v: SparseOperator, site_hamiltonian, lattice: LatticeSpec,
                    site: Optional[int] = None) -> tuple:
    """Split a site-local operator into pieces with sharp local transition energies."""
    if v.support is None or len(v.support) != 1:
        raise ValueError(f"coupling operator must act on exactly one site, support={v.support}")
    (i0,) = tuple(v.support)
    if site is not None and site != i0:
        raise ValueError(f"operator acts on site {i0}, not on site {site}")
    h_loc = np.asarray(site_hamiltonian, dtype=complex)
    vloc = _local_matrix(v, lattice, i0)
    e_loc, vecs = np.linalg.eigh(h_loc)
    vk = vecs.conj().T @ vloc @ vecs
    scale = np.abs(vk).max()
    groups: list = []  # [eps, local matrix, elements]
    for k in range(len(e_loc)):
        for q in range(len(e_loc)):
            if abs(vk[k, q]) <= 1e-14 * scale:
                continue
            eps = float(e_loc[k] - e_loc[q])
            piece = vk[k, q] * np.outer(vecs[:, k], vecs[:, q].conj())
            for g in groups:
                if abs(g[0] - eps) < EPS_MERGE * max(1.0, abs(eps)):
                    g[1] = g[1] + piece
                    g[2].append((complex(vk[k, q]), float(e_loc[q])))
                    break
            else:
                groups.append([eps, piece, [(complex(vk[k, q]), float(e_loc[q]))]])
    groups.sort(key=lambda g: g[0])
    out = []
    for eps, mat, elems in groups:
        mat = np.where(np.abs(mat) < 1e-15 * scale, 0.0, mat)
        out.append(LocalPiece(embed_site_operator(lattice, i0, mat), eps, tuple(elems)))
    return tuple(out)


@dataclass(frozen=True)
class CouplingChannel:
    """One term [u rho, v] + h.c. of the Redfield dissipator.

    ``source`` is the operator whose interaction-picture convolution with the
    bath correlation function gives u; for Hermitian couplings it equals v.
    For a particle reservoir the absorbing channel has source a^dag and v = a.
    """

    v: SparseOperator
    source: SparseOperator
    site: int
    bath: BathSpec
    kind: SpectralKind
    site_hamiltonian: np.ndarray = field(repr=False)
    local_decomposition: tuple = field(repr=False)
    name: str = ""

    def w(self, E):
        return spectral_function(self.bath, E, self.kind)

    @property
    def temperature(self) -> float:
        return self.bath.T


def hermitian_channel(model: ChainModel, site: int, local_op, bath: BathSpec,
                      name: str = "") -> CouplingChannel:
    if bath.family is BathFamily.RESERVOIR:
        raise ValueError("a particle reservoir couples through exchange channels")
    v = model.site_op(site, local_op)
    if not v.is_hermitian():
        raise ValueError("hermitian_channel needs a Hermitian coupling operator")
    h_loc = model.site_hamiltonians[site]
    dec = local_decompose(v, h_loc, model.lattice)
    return CouplingChannel(v, v, site, bath, SpectralKind.W, h_loc, dec, name or f"site{site}")


def exchange_channels(model: ChainModel, site: int, bath: BathSpec, name: str = "") -> tuple:
    """Absorption and emission channels for particle exchange with a reservoir."""
    if bath.family is not BathFamily.RESERVOIR:
        raise ValueError("exchange channels need a particle-reservoir bath")
    low = model.site_op(site, model.lowering())
    rise = low.dag()
    h_loc = model.site_hamiltonians[site]
    tag = name or f"site{site}"
    absorb = CouplingChannel(low, rise, site, bath, SpectralKind.ABSORB, h_loc,
                             local_decompose(rise, h_loc, model.lattice), tag + ":absorb")
    emit = CouplingChannel(rise, low, site, bath, SpectralKind.EMIT, h_loc,
                           local_decompose(low, h_loc, model.lattice), tag + ":emit")
    return absorb, emit


# initial states ----------------------------------------------------------------

def build_initial_state(lattice: LatticeSpec, kind: str,
                        occupations: Optional[Sequence[int]] = None) -> np.ndarray:
    """Normalized product state: 'x-polarized', 'all-up' or 'fock' (with occupations)."""
    if kind == "x-polarized":
        if any(d != 2 for d in lattice.local_dims):
            raise ValueError("x-polarized state needs spin-1/2 sites")
        local = [np.array([1, 1], dtype=complex) / np.sqrt(2)] * lattice.num_sites
    elif kind == "all-up":
        if any(d != 2 for d in lattice.local_dims):
            raise ValueError("all-up state needs spin-1/2 sites")
        local = [np.array([1, 0], dtype=complex)] * lattice.num_sites
    elif kind == "fock":
        if occupations is None or len(occupations) != lattice.num_sites:
            raise ValueError("fock state needs one occupation per site")
        local = []
        for n, d in zip(occupations, lattice.local_dims):
            if not 0 <= n < d:
                raise ValueError(f"occupation {n} exceeds the cutoff {d - 1}")
            e = np.zeros(d, dtype=complex)
            e[n] = 1.0
            local.append(e)
    else:
        raise ValueError(f"unknown initial state {kind!r}")
    psi = local[0]
    for vec in local[1:]:
        psi = np.kron(psi, vec)
    return psi / np.linalg.norm(psi)
