"""Open-system setups and the method switch used by the CLI and the acceptance runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .analysis import trace_norm_distance
from .bath import BathFamily, BathSpec, bath_correlation_time
from .expansion import ExpansionMode, ExpansionPolicy, expansion_u
from .lindblad import local_lindblad_generator, standard_local_lindblad_generator
from .models import (SIGMA_X, BoseHubbardSpec, ChainModel, XxzSpec, bose_hubbard_chain,
                     exchange_channels, hermitian_channel, xxz_chain)
from .operators import dense_diagonalize
from .redfield import Generator, RedfieldGenerator, exact_redfield, steady_state


class Method(str, Enum):
    EXACT_REDFIELD = "exact-redfield"
    ADHOC_REDFIELD = "adhoc-redfield"
    LOCAL_REDFIELD = "local-redfield"
    ADHOC_LINDBLAD = "adhoc-lindblad"
    LOCAL_LINDBLAD = "local-lindblad"
    STANDARD_LOCAL_LINDBLAD = "standard-local-lindblad"

    @property
    def is_lindblad(self) -> bool:
        return self in (Method.ADHOC_LINDBLAD, Method.LOCAL_LINDBLAD, Method.STANDARD_LOCAL_LINDBLAD)


@dataclass
class OpenSystem:
    """A chain model together with its bath channels."""

    model: ChainModel
    channels: tuple
    _eigen: Optional[tuple] = field(default=None, repr=False)

    @property
    def h_s(self):
        return self.model.h_s

    @property
    def eigen_cache(self) -> tuple:
        if self._eigen is None:
            self._eigen = dense_diagonalize(self.model.h_s)
        return self._eigen

    def baths(self) -> list:
        return [ch.bath for ch in self.channels]


def xxz_two_bath(L: int = 6, J: float = 1.0, Delta: float = 0.7, h: float = 1.0,
                 delta: float = -0.07, gamma: float = 0.25, T_l: float = 2.2,
                 T_r: Optional[float] = None, family: str = "ohmic",
                 E_D: Optional[float] = None) -> OpenSystem:
    """XXZ chain with sigma^x couplings to independent baths on the first and last site."""
    model = xxz_chain(XxzSpec(L, J, Delta, h, delta))
    T_r = T_l if T_r is None else T_r

    def make(T):
        if BathFamily(family) is BathFamily.DRUDE:
            return BathSpec.drude(gamma, T, E_D)
        return BathSpec.ohmic(gamma, T)

    chans = (hermitian_channel(model, 0, SIGMA_X, make(T_l), "left"),
             hermitian_channel(model, L - 1, SIGMA_X, make(T_r), "right"))
    return OpenSystem(model, chans)


def bose_hubbard_reservoir(L: int = 4, J: float = 1.0, U: float = 0.5, trap: float = 0.35,
                           n_cut: int = 2, gamma: float = 0.25, T: float = 2.0,
                           mu: Optional[float] = None, site: int = 0) -> OpenSystem:
    """Bose-Hubbard chain exchanging particles with a reservoir on one site (default mu = -2.5 T)."""
    model = bose_hubbard_chain(BoseHubbardSpec(L, J, U, trap, n_cut))
    mu = -2.5 * T if mu is None else mu
    chans = exchange_channels(model, site, BathSpec.reservoir(gamma, T, mu), "reservoir")
    return OpenSystem(model, chans)


def build_generator(system: OpenSystem, method, order: int = 1,
                    eps0: Optional[float] = None) -> Generator:
    """Generator of ``system`` for one of the six methods."""
    method = Method(method)
    h_s = system.h_s
    if method is Method.EXACT_REDFIELD:
        return exact_redfield(h_s, system.channels)
    if method is Method.STANDARD_LOCAL_LINDBLAD:
        baths = system.baths()
        return standard_local_lindblad_generator(system.model, baths[0], baths[-1])
    adhoc = method in (Method.ADHOC_REDFIELD, Method.ADHOC_LINDBLAD)
    policy = ExpansionPolicy(order, ExpansionMode.ADHOC if adhoc else ExpansionMode.LOCAL,
                             (0.0 if eps0 is None else eps0) if adhoc else None)
    if method.is_lindblad:
        return local_lindblad_generator(h_s, system.channels, policy)
    pairs = [(expansion_u(h_s, ch, policy), ch.v) for ch in system.channels]
    return RedfieldGenerator(h_s, pairs)


def steady_state_error(system: OpenSystem, method, order: int = 1, eps0: Optional[float] = None,
                       reference: Optional[np.ndarray] = None, ss_method: str = "auto") -> float:
    """Trace distance between the method's steady state and the exact Redfield one."""
    if reference is None:
        reference = steady_state(build_generator(system, Method.EXACT_REDFIELD), ss_method)
    rho = steady_state(build_generator(system, method, order, eps0), ss_method)
    return trace_norm_distance(rho, reference)


def timescale_ratio(system: OpenSystem) -> float:
    """tau_B / tau_S with tau_B from the (first) bath and tau_S = 1/J."""
    tau_b = bath_correlation_time(system.channels[0].bath)
    return tau_b * system.model.spec.J


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 4:
        raise ValueError("a power-law fit needs at least 4 points")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
