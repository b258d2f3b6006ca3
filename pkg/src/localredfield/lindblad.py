"""Pseudo-Lindblad form of Redfield generators and the local Lindblad equations.

A Redfield channel (u, v) can be rewritten for any complex eta as

    -i[H_eff, rho] + D[L+] - D[L-],   H_eff = H - (i/2)(v u - u^dag v^dag),

with L+ ~ u/eta + eta v^dag and L- ~ u/eta* - eta* v^dag. Choosing eta such that
L- is small and dropping it gives a Lindblad equation.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bath import BathFamily, BathSpec, spectral_function
from .expansion import ExpansionMode, ExpansionPolicy, expansion_u
from .models import SIGMA_MINUS, SIGMA_PLUS, ChainModel
from .operators import SparseOperator
from .redfield import Generator, LindbladGenerator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PseudoLindbladForm:
    """Exact rewrite of one or more Redfield channels.

    ``etas`` holds eta^2 per channel (equal to lambda for real parameters).
    """

    h_eff: SparseOperator
    l_plus: tuple
    l_minus: tuple
    etas: tuple

    def generator(self, keep_negative: bool = True) -> Generator:
        """Generator of the full pseudo-Lindblad equation (or only its positive part)."""
        if not keep_negative:
            return LindbladGenerator(self.h_eff, self.l_plus)
        k = -1j * self.h_eff.matrix
        sand = []
        for L in self.l_plus:
            k = k - 0.5 * (L.matrix.getH() @ L.matrix)
            sand.append((L.matrix, 0.5 * L.matrix.getH()))
        for L in self.l_minus:
            k = k + 0.5 * (L.matrix.getH() @ L.matrix)
            sand.append((-L.matrix, 0.5 * L.matrix.getH()))
        return Generator(k, sand)


def _eta_from(lam=None, eta=None) -> complex:
    if (lam is None) == (eta is None):
        raise ValueError("give exactly one of lam (real, > 0) or eta (complex)")
    if lam is not None:
        if np.iscomplexobj(lam) and abs(np.imag(lam)) > 0:
            raise ValueError("lam must be real; pass eta for complex parameters")
        lam = float(np.real(lam))
        if not lam > 0:
            raise ValueError(f"lam must be positive, got {lam}")
        return complex(math.sqrt(lam))
    eta = complex(eta)
    if eta == 0:
        raise ValueError("eta must be nonzero")
    if (eta * eta).real == 0:
        raise ValueError("eta^2 must have a nonzero real part")
    return eta


def eta_for_w(w: complex) -> complex:
    """eta with (eta*)^2 = w, principal branch; this cancels u = w v^dag in L-."""
    w = complex(w)
    if w == 0:
        raise ValueError("W(eps0) = 0 admits no pseudo-Lindblad parameter")
    return cmath.sqrt(w.conjugate())


def channel_jump_pair(u: SparseOperator, v: SparseOperator, lam=None, eta=None) -> tuple:
    """(L+, L-) for a single channel, rates folded into the operators."""
    eta = _eta_from(lam, eta)
    omega = abs(eta) ** 2 / (2 * (eta * eta).real)
    vd = v.dag()
    a_plus = (1 / eta) * u + eta * vd
    a_minus = (1 / eta.conjugate()) * u - eta.conjugate() * vd
    s = math.sqrt(abs(omega))
    if omega < 0:
        a_plus, a_minus = a_minus, a_plus
    return s * a_plus, s * a_minus


def pseudo_lindblad_decompose(h_s: SparseOperator, pairs: Sequence[tuple], params: Sequence,
                              complex_eta: bool = False) -> PseudoLindbladForm:
    """Rewrite sum_j [u_j rho, v_j] + h.c. in pseudo-Lindblad form.

    ``params`` gives one lambda (real) per channel, or one eta when
    ``complex_eta`` is set.
    """
    if len(params) != len(pairs):
        raise ValueError("need one lambda/eta per channel")
    herm = h_s.matrix.copy()
    lp, lm, etas = [], [], []
    for (u, v), p in zip(pairs, params):
        eta = _eta_from(eta=p) if complex_eta else _eta_from(lam=p)
        L_plus, L_minus = channel_jump_pair(u, v, eta=eta)
        vu = v.matrix @ u.matrix
        herm = herm - 0.5j * (vu - vu.getH())
        lp.append(L_plus)
        lm.append(L_minus)
        etas.append(eta * eta)
    h_eff = SparseOperator(herm, None)
    if not h_eff.is_hermitian(1e-12):
        raise ValueError("effective Hamiltonian came out non-Hermitian")
    h_eff = SparseOperator(0.5 * (herm + herm.getH()), None, hermitian=True)
    return PseudoLindbladForm(h_eff, tuple(lp), tuple(lm), tuple(etas))


def _local_weights(channel):
    T = channel.bath.T
    e_min = min((e for p in channel.local_decomposition for _, e in p.elements), default=0.0)
    # shifting E_q by a constant rescales all r_kq equally and drops out of the ratio
    for piece in channel.local_decomposition:
        w = complex(spectral_function(channel.bath, piece.eps, channel.kind))
        for m, e in piece.elements:
            yield w, m * math.exp(-(e - e_min) / T)


def lambda_local(channel) -> complex:
    """Thermally weighted expansion parameter for the local Lindblad equation.

    For real W and real matrix elements this is the real, positive
    sqrt(sum W(eps)^2 r^2 / sum r^2), r_kq = <k|v|q> exp(-E_q/T). Otherwise it
    is the ratio of pseudo-norms sqrt(sum A_ij^2) (principal branch), which
    equals (eta*)^2 and is complex in general.
    """
    data = list(_local_weights(channel))
    if not data or all(abs(r) == 0 for _, r in data):
        raise ValueError(f"channel {channel.name!r} has a trivial coupling")
    ws = np.array([w for w, _ in data])
    rs = np.array([r for _, r in data])
    if np.all(np.abs(ws.imag) == 0) and np.all(np.abs(rs.imag) == 0):
        num = np.sum(ws.real**2 * np.abs(rs) ** 2)
        return complex(math.sqrt(num / np.sum(np.abs(rs) ** 2)))
    return complex(cmath.sqrt(np.sum((ws * rs) ** 2)) / cmath.sqrt(np.sum(rs**2)))


def _eta_for_channel(channel, policy: ExpansionPolicy) -> complex:
    if policy.mode is ExpansionMode.ADHOC:
        order, eps0 = policy.for_channel(channel.name)
        return eta_for_w(spectral_function(channel.bath, float(eps0), channel.kind))
    return eta_for_w(lambda_local(channel))


def local_lindblad_form(h_s: SparseOperator, channels: Sequence, policy: ExpansionPolicy) -> PseudoLindbladForm:
    pairs = [(expansion_u(h_s, ch, policy), ch.v) for ch in channels]
    etas = [_eta_for_channel(ch, policy) for ch in channels]
    return pseudo_lindblad_decompose(h_s, pairs, etas, complex_eta=True)


def local_lindblad_generator(h_s: SparseOperator, channels: Sequence,
                             policy: ExpansionPolicy) -> LindbladGenerator:
    """Positive part of the pseudo-Lindblad form of the expanded Redfield equation."""
    form = local_lindblad_form(h_s, channels, policy)
    for ch, L in zip(channels, form.l_minus):
        logger.info("channel %s: discarded ||L-||_F = %.3e", ch.name, L.norm())
    gen = LindbladGenerator(form.h_eff, form.l_plus)
    gen.discarded_norms = tuple(L.norm() for L in form.l_minus)
    return gen


def standard_local_lindblad_generator(model: ChainModel, left: BathSpec,
                                      right: Optional[BathSpec] = None) -> LindbladGenerator:
    """Boundary dissipators sqrt(2W(-2h_i)) sigma^- and sqrt(2W(2h_i)) sigma^+ on the end sites."""
    if model.kind != "xxz":
        raise ValueError("the traditional local Lindblad baseline is defined for the XXZ chain")
    right = left if right is None else right
    jumps = []
    for site, bath in ((0, left), (model.L - 1, right)):
        if bath.family is not BathFamily.OHMIC:
            raise ValueError("traditional local Lindblad baseline needs ohmic baths")
        h_i = model.spec.field(site)
        g_minus = 2 * float(np.real(spectral_function(bath, -2 * h_i)))
        g_plus = 2 * float(np.real(spectral_function(bath, 2 * h_i)))
        jumps.append(math.sqrt(g_minus) * model.site_op(site, SIGMA_MINUS))
        jumps.append(math.sqrt(g_plus) * model.site_op(site, SIGMA_PLUS))
    return LindbladGenerator(model.h_s, jumps)
