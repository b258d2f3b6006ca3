"""Correlation-time expansion of the Redfield jump operator.

The exact u needs the global eigenbasis. Expanding W around an energy eps0
turns u into a power series of the shifted adjoint map ad_H - eps0 applied
to v, i.e. nested commutators that stay sparse for local H and v:

    u ~ sum_{n<=N} W^(n)(eps0)/n! (ad_H - eps0)^n [v].

The local variant expands each piece of the local spectral decomposition of
v around its own local transition energy.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .bath import BathSpec, SpectralKind, spectral_function, taylor_coefficients
from .operators import DENSE_CAP, DimensionError, SparseOperator, dense_diagonalize, shifted_adjoint_apply, as_dense

logger = logging.getLogger(__name__)


class ExpansionDivergenceWarning(RuntimeWarning):
    """Term norms of the expansion stopped decreasing."""


class ExpansionMode(str, Enum):
    ADHOC = "adhoc"
    LOCAL = "local"


@dataclass(frozen=True)
class ExpansionPolicy:
    order: int
    mode: ExpansionMode = ExpansionMode.LOCAL
    eps0: Optional[float] = None
    overrides: dict = field(default_factory=dict)  # channel name -> (order, eps0)

    def __post_init__(self):
        object.__setattr__(self, "mode", ExpansionMode(self.mode))
        if self.order < 0:
            raise ValueError(f"expansion order must be >= 0, got {self.order}")
        if self.mode is ExpansionMode.ADHOC and self.eps0 is None:
            raise ValueError("ad-hoc expansion needs an explicit eps0")

    def for_channel(self, name: str) -> tuple:
        return self.overrides.get(name, (self.order, self.eps0))


def taylor_weights(bath: BathSpec, eps0: float, order: int,
                   kind: SpectralKind = SpectralKind.W) -> np.ndarray:
    """W^(n)(eps0)/n! for n = 0..order; order zero taken from W directly."""
    if order == 0:
        return np.array([complex(spectral_function(bath, float(eps0), kind))])
    c = taylor_coefficients(bath, eps0, order, kind)
    c[0] = spectral_function(bath, float(eps0), kind)
    return c


def nested_commutators(h_s: SparseOperator, v: SparseOperator, eps0: float, order: int) -> list:
    """[v, (ad_H - eps0)[v], ..., (ad_H - eps0)^order [v]]."""
    terms = [v]
    for _ in range(order):
        nxt = shifted_adjoint_apply(h_s, eps0, terms[-1])
        terms.append(nxt)
        if nxt.nnz == 0:
            zero = nxt
            terms.extend([zero] * (order + 1 - len(terms)))
            break
    return terms


def _combine(terms: Sequence[SparseOperator], weights: np.ndarray) -> SparseOperator:
    out = weights[0] * terms[0].matrix
    support = terms[0].support
    for w, x in zip(weights[1:], terms[1:]):
        if x.nnz:
            out = out + w * x.matrix
            support = None if support is None or x.support is None else support | x.support
    return SparseOperator(out, support)


class ChannelExpansion:
    """Nested commutators of one channel, built once per (piece, eps) and reused."""

    def __init__(self, h_s: SparseOperator, channel, mode: ExpansionMode = ExpansionMode.LOCAL,
                 eps0: Optional[float] = None):
        self.h_s = h_s
        self.channel = channel
        self.mode = ExpansionMode(mode)
        if self.mode is ExpansionMode.ADHOC:
            if eps0 is None:
                raise ValueError("ad-hoc expansion needs an explicit eps0")
            self.pieces = [(channel.source, float(eps0))]
        else:
            self.pieces = [(p.op, p.eps) for p in channel.local_decomposition]
        self._powers: list = [None] * len(self.pieces)

    def powers(self, order: int) -> list:
        out = []
        for i, (op, eps) in enumerate(self.pieces):
            cached = self._powers[i]
            if cached is None or len(cached) <= order:
                start = [op] if cached is None else cached
                more = nested_commutators(self.h_s, start[-1], eps, order + 1 - len(start))
                cached = start + more[1:]
                self._powers[i] = cached
            out.append(cached[: order + 1])
        return out

    def weights(self, order: int) -> list:
        ch = self.channel
        return [taylor_weights(ch.bath, eps, order, ch.kind) for _, eps in self.pieces]

    def order_contributions(self, order: int) -> list:
        """Operators sum_pieces W^(n)(eps)/n! x_n, one per order n."""
        pw = self.powers(order)
        ws = self.weights(order)
        out = []
        for n in range(order + 1):
            m = sum(w[n] * p[n].matrix for w, p in zip(ws, pw))
            out.append(SparseOperator(m, None))
        return out

    def u(self, order: int) -> SparseOperator:
        pw = self.powers(order)
        ws = self.weights(order)
        parts = [_combine(p, w) for p, w in zip(pw, ws)]
        total = parts[0]
        for p in parts[1:]:
            total = total + p
        return total


def adhoc_u(h_s: SparseOperator, v: SparseOperator, bath: BathSpec, eps0: float, order: int,
            kind: SpectralKind = SpectralKind.W) -> SparseOperator:
    """Ad-hoc expansion of u around a single energy eps0."""
    terms = nested_commutators(h_s, v, eps0, order)
    return _combine(terms, taylor_weights(bath, eps0, order, kind))


def local_u(h_s: SparseOperator, channel, order: int) -> SparseOperator:
    """Local expansion: every local piece expanded around its own transition energy."""
    return ChannelExpansion(h_s, channel, ExpansionMode.LOCAL).u(order)


def expansion_u(h_s: SparseOperator, channel, policy: ExpansionPolicy) -> SparseOperator:
    order, eps0 = policy.for_channel(channel.name)
    if policy.mode is ExpansionMode.ADHOC:
        return adhoc_u(h_s, channel.source, channel.bath, eps0, order, channel.kind)
    return local_u(h_s, channel, order)


def expansion_term_norms(h_s: SparseOperator, channel, order: int,
                         mode: ExpansionMode = ExpansionMode.LOCAL,
                         eps0: Optional[float] = None, warn: bool = True) -> list:
    """Frobenius norm of each order-n contribution to u.

    Emits an ExpansionDivergenceWarning when a term beyond the first order is
    larger than its predecessor.
    """
    exp = ChannelExpansion(h_s, channel, mode, eps0)
    norms = [c.norm() for c in exp.order_contributions(order)]
    scale = max(norms) if norms else 0.0
    for n in range(1, len(norms) - 1):
        if norms[n] > 1e-13 * scale and norms[n + 1] > norms[n]:
            if warn:
                warnings.warn(f"expansion terms grow from order {n} to {n + 1} "
                              f"({norms[n]:.3e} -> {norms[n + 1]:.3e}) on channel {channel.name!r}",
                              ExpansionDivergenceWarning, stacklevel=2)
            break
    return norms


def coupling_matrix_element_screen(h_s: SparseOperator, v: SparseOperator,
                                   threshold: float = 1e-3, eigen_cache=None) -> tuple:
    """Smallest symmetric interval [-a, a] holding all E_k - E_q with |<k|v|q>| >= threshold.

    Also returns the largest |<k|v|q>| outside that interval, i.e. below threshold.
    """
    if h_s.dim > DENSE_CAP:
        raise DimensionError(f"screening needs dim <= {DENSE_CAP}, got {h_s.dim}")
    evals, U = eigen_cache if eigen_cache is not None else dense_diagonalize(h_s)
    vk = np.abs(U.conj().T @ as_dense(v) @ U)
    diff = np.abs(evals[:, None] - evals[None, :])
    keep = vk >= threshold
    a = float(diff[keep].max()) if keep.any() else 0.0
    outside = vk[diff > a]
    return (-a, a), float(outside.max()) if outside.size else 0.0
