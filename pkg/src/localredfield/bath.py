"""Bath spectral functions W(E), their derivatives and correlation functions.

Units: hbar = k_B = 1. ``W(E)`` is the one-sided Fourier-Laplace transform
``int_0^inf dt exp(-iEt) C(t)`` of the bath correlation function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import digamma

CONTOUR_POINTS = 128
SERIES_THRESHOLD = 1e-4
MATSUBARA_CAP = 100_000


class BathFamily(str, Enum):
    OHMIC = "ohmic"
    DRUDE = "drude"
    RESERVOIR = "reservoir"


class SpectralKind(str, Enum):
    """Which spectral function a coupling channel uses."""

    W = "w"
    ABSORB = "absorb"  # W1(E) = J(E) n_B(E), particle enters the system
    EMIT = "emit"  # W2(E) = J(-E) (1 + n_B(-E)), particle leaves the system


class BathError(ValueError):
    pass


@dataclass(frozen=True)
class BathSpec:
    family: BathFamily
    gamma: float
    T: float
    E_D: Optional[float] = None
    mu: Optional[float] = None
    matsubara_terms: int = MATSUBARA_CAP

    def __post_init__(self):
        object.__setattr__(self, "family", BathFamily(self.family))
        if not self.T > 0:
            raise BathError(f"temperature must be positive, got {self.T}")
        if not self.gamma > 0:
            raise BathError(f"gamma must be positive, got {self.gamma}")
        if self.family is BathFamily.DRUDE:
            if self.E_D is None or not self.E_D > 0:
                raise BathError("Drude-Lorentz bath needs a positive cutoff E_D")
            _check_drude_resonance(self.E_D, self.T)
        if self.family is BathFamily.RESERVOIR and self.mu is None:
            raise BathError("particle reservoir needs a chemical potential mu")

    @classmethod
    def ohmic(cls, gamma: float, T: float) -> "BathSpec":
        return cls(BathFamily.OHMIC, gamma, T)

    @classmethod
    def drude(cls, gamma: float, T: float, E_D: float) -> "BathSpec":
        return cls(BathFamily.DRUDE, gamma, T, E_D=E_D)

    @classmethod
    def reservoir(cls, gamma: float, T: float, mu: float) -> "BathSpec":
        return cls(BathFamily.RESERVOIR, gamma, T, mu=mu)

    @property
    def has_imaginary_part(self) -> bool:
        return self.family is BathFamily.DRUDE


def _check_drude_resonance(E_D: float, T: float) -> None:
    ratio = E_D / (2 * math.pi * T)
    l = round(ratio)
    if l >= 1 and abs(ratio - l) < 1e-10:
        raise BathError(f"Matsubara frequency nu_{l} coincides with the Drude cutoff E_D={E_D}")


def _x_over_expm1(x):
    """x / (exp(x) - 1), analytic at x = 0; accepts complex arrays."""
    x = np.asarray(x)
    small = np.abs(x) < SERIES_THRESHOLD
    out = np.empty(x.shape, dtype=np.result_type(x, float))
    xs = x[small]
    out[small] = 1.0 - xs / 2.0 + xs**2 / 12.0
    xl = x[~small]
    out[~small] = xl / np.expm1(xl)
    return out if out.ndim else out[()]


def _is_real_input(E) -> bool:
    return not np.iscomplexobj(E)


def w_ohmic(bath: BathSpec, E):
    if bath.family is not BathFamily.OHMIC:
        raise BathError(f"w_ohmic called with a {bath.family.value} bath")
    return bath.gamma * bath.T * _x_over_expm1(np.asarray(E) / bath.T)


def _drude_matsubara_sum(E, E_D: float, T: float):
    """sum_l nu_l / ([1 - (nu_l/E_D)^2] (nu_l^2 + E^2)) in closed form via digamma."""
    a = 2 * math.pi * T
    x = np.asarray(E, dtype=complex) / a
    y = E_D / a
    bracket = digamma(1 + y) + digamma(1 - y) - digamma(1 + 1j * x) - digamma(1 - 1j * x)
    return E_D**2 / (E_D**2 + np.asarray(E) ** 2) * bracket / (2 * a)


def drude_matsubara_sum_direct(E, E_D: float, T: float, n_terms: int) -> complex:
    """Truncated Matsubara sum, kept as an independent check of the closed form."""
    nu = 2 * math.pi * T * np.arange(1, n_terms + 1)
    return complex(np.sum(nu / ((1 - (nu / E_D) ** 2) * (nu**2 + E**2))))


def w_drude(bath: BathSpec, E):
    if bath.family is not BathFamily.DRUDE:
        raise BathError(f"w_drude called with a {bath.family.value} bath")
    g, T, ED = bath.gamma, bath.T, bath.E_D
    E = np.asarray(E)
    lorentz = 1.0 / (1.0 + E**2 / ED**2)
    real_part = g * T * _x_over_expm1(E / T) * lorentz
    cot = 1.0 / math.tan(ED / (2 * T))
    imag = (2 * g * T * E * _drude_matsubara_sum(E, ED, T)
            - g * ED**2 * E / (2 * (ED**2 + E**2)) * cot
            - g * ED**3 / (2 * (ED**2 + E**2)))
    out = real_part + 1j * imag
    return out if np.ndim(out) else complex(out)


def w_reservoir(bath: BathSpec, E, channel: SpectralKind):
    """Flat-band particle reservoir; imaginary parts are neglected."""
    if bath.family is not BathFamily.RESERVOIR:
        raise BathError(f"w_reservoir called with a {bath.family.value} bath")
    channel = SpectralKind(channel)
    E = np.asarray(E)
    g, T, mu = bath.gamma, bath.T, bath.mu
    if channel is SpectralKind.ABSORB:
        arg = (E - mu) / T
        if _is_real_input(E) and np.any(arg <= 0):
            raise BathError(f"Bose occupation diverges: E - mu <= 0 (mu={mu})")
        out = g / np.expm1(arg)
    elif channel is SpectralKind.EMIT:
        arg = (-E - mu) / T
        if np.any(arg == 0):
            raise BathError(f"Bose occupation diverges at E = -mu = {-mu}")
        out = g * (1.0 + 1.0 / np.expm1(arg))
    else:
        raise BathError("reservoir channel must be 'absorb' or 'emit'")
    return out if np.ndim(out) else out[()]


def spectral_function(bath: BathSpec, E, kind: SpectralKind = SpectralKind.W):
    kind = SpectralKind(kind)
    if bath.family is BathFamily.RESERVOIR:
        return w_reservoir(bath, E, kind)
    if kind is not SpectralKind.W:
        raise BathError(f"{bath.family.value} bath has no '{kind.value}' channel")
    if bath.family is BathFamily.OHMIC:
        return w_ohmic(bath, E)
    return w_drude(bath, E)


def singularities(bath: BathSpec, kind: SpectralKind = SpectralKind.W, n: int = 2) -> list:
    """Nearest complex singularities of W (used for contour safety)."""
    kind = SpectralKind(kind)
    nu = [2j * math.pi * bath.T * l for l in range(1, n + 1)]
    poles = nu + [-p for p in nu]
    if bath.family is BathFamily.DRUDE:
        poles += [1j * bath.E_D, -1j * bath.E_D]
    if bath.family is BathFamily.RESERVOIR:
        shift = bath.mu if kind is SpectralKind.ABSORB else -bath.mu
        poles = [shift + p for p in poles] + [complex(shift)]
    return poles


def contour_radius(bath: BathSpec, eps0: float, kind: SpectralKind = SpectralKind.W) -> float:
    r = math.pi * bath.T
    if bath.family is BathFamily.DRUDE:
        r = min(r, bath.E_D / 2)
    if bath.family is BathFamily.RESERVOIR:
        shift = bath.mu if SpectralKind(kind) is SpectralKind.ABSORB else -bath.mu
        r = min(r, abs(eps0 - shift) / 2)
    return r


class ContourError(BathError):
    pass


def taylor_coefficients(bath: BathSpec, eps0: float, n_max: int,
                        kind: SpectralKind = SpectralKind.W,
                        radius: Optional[float] = None,
                        points: int = CONTOUR_POINTS) -> np.ndarray:
    """Taylor coefficients W^(n)(eps0)/n!, n = 0..n_max, by Cauchy contour integration."""
    kind = SpectralKind(kind)
    if bath.family is BathFamily.RESERVOIR and kind is SpectralKind.ABSORB and eps0 <= bath.mu:
        raise ContourError(f"expansion energy {eps0} lies below the reservoir pole mu={bath.mu}")
    r = contour_radius(bath, eps0, kind) if radius is None else float(radius)
    if not r > 1e-12:
        raise ContourError(f"expansion energy {eps0} sits on a singularity of W")
    for p in singularities(bath, kind):
        if abs(p - eps0) <= r:
            raise ContourError(f"contour of radius {r} around {eps0} encloses the pole at {p}")
    if n_max >= points:
        raise ContourError(f"derivative order {n_max} needs more than {points} contour points")
    theta = 2 * np.pi * np.arange(points) / points
    z = eps0 + r * np.exp(1j * theta)
    f = np.asarray(spectral_function(bath, z, kind), dtype=complex)
    coeffs = np.fft.fft(f)[: n_max + 1] / points
    coeffs = coeffs / r ** np.arange(n_max + 1)
    if not bath.has_imaginary_part:
        coeffs = coeffs.real.astype(complex)
    return coeffs


def w_derivatives(bath: BathSpec, eps0: float, n_max: int,
                  kind: SpectralKind = SpectralKind.W) -> np.ndarray:
    """W^(n)(eps0) for n = 0..n_max; order zero is evaluated directly."""
    coeffs = taylor_coefficients(bath, eps0, n_max, kind)
    fact = np.array([math.factorial(n) for n in range(n_max + 1)], dtype=float)
    out = coeffs * fact
    out[0] = spectral_function(bath, float(eps0), kind)
    return out


def _matsubara_remainder(t: float, E_D: float, T: float, cap: int) -> float:
    """sum_l exp(-nu_l t) / (nu_l (nu_l^2 - E_D^2)), summed until the tail is negligible."""
    a = 2 * math.pi * T
    total = 0.0
    start = 1
    block = 1024
    while start <= cap:
        l = np.arange(start, min(start + block, cap + 1))
        nu = a * l
        terms = np.exp(-nu * t) / (nu * (nu**2 - E_D**2))
        total += float(np.sum(terms))
        last = abs(terms[-1])
        # tail bound: terms decay at least like 1/l^3 and geometrically in t
        q = math.exp(-a * t)
        tail = last * min(l[-1] / 2.0, q / (1 - q) if q < 1 else math.inf)
        if tail < 1e-10 * abs(total):
            return total
        start = int(l[-1]) + 1
        block *= 2
    return total


def bath_correlation_drude(bath: BathSpec, t: float) -> complex:
    if bath.family is not BathFamily.DRUDE:
        raise BathError("bath_correlation_drude needs a Drude-Lorentz bath")
    if not t > 0:
        raise BathError(f"correlation function defined for t > 0, got {t}")
    g, T, ED = bath.gamma, bath.T, bath.E_D
    a = 2 * math.pi * T
    cot = 1.0 / math.tan(ED / (2 * T))
    head = 0.5 * g * ED**2 * (cot - 1j) * math.exp(-ED * t)
    # nu/(1-nu^2/E_D^2) = -E_D^2/nu - E_D^4/(nu (nu^2 - E_D^2)); the first piece sums to a log
    log_part = (ED**2 / a) * math.log(-math.expm1(-a * t))
    rem = _matsubara_remainder(t, ED, T, bath.matsubara_terms)
    matsubara = log_part - ED**4 * rem
    return complex(head - 2 * g * T * matsubara)


def bath_correlation_time(bath: BathSpec) -> float:
    """Longest exponential decay time of C(t)."""
    if bath.family is BathFamily.OHMIC:
        return 1.0 / (2 * math.pi * bath.T)
    if bath.family is BathFamily.DRUDE:
        return 1.0 / min(2 * math.pi * bath.T, bath.E_D)
    raise BathError("bath correlation time is defined for ohmic and Drude-Lorentz baths")
