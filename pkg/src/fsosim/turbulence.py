"""Gamma-Gamma atmospheric turbulence model.

Covers the path from atmospheric conditions to intensity samples:
Hufnagel-Valley refractive-index structure parameter, Rytov variance for a
plane-wave horizontal link, the (alpha, beta) Gamma-Gamma parameterization,
the intensity density, and a seeded sampler.

Intensities are normalized to unit mean, so symbol energy accounting stays
independent of the turbulence regime.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln


@dataclass(frozen=True)
class AtmosphericProfile:
    """Ground-level atmospheric conditions for the structure-parameter profile.

    altitude_h in meters, wind_v in m/s, ground_turbulence_a0 in m^(-2/3).
    """

    altitude_h: float
    wind_v: float
    ground_turbulence_a0: float

    def __post_init__(self):
        for name in ("altitude_h", "wind_v", "ground_turbulence_a0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.altitude_h < 0:
            raise ValueError("altitude_h must be nonnegative")
        if self.wind_v < 0:
            raise ValueError("wind_v must be nonnegative")
        if self.ground_turbulence_a0 <= 0:
            raise ValueError("ground_turbulence_a0 must be positive")


@dataclass(frozen=True)
class LinkGeometry:
    """Optical link parameters: wavelength and distance in meters, cn2 in m^(-2/3)."""

    wavelength_lambda: float
    distance_l: float
    cn2: float

    def __post_init__(self):
        if not (100e-9 < self.wavelength_lambda < 100e-6):
            raise ValueError("wavelength outside the optical sanity band (100 nm, 100 um)")
        if not (math.isfinite(self.distance_l) and self.distance_l > 0):
            raise ValueError("distance_l must be positive and finite")
        if not (math.isfinite(self.cn2) and self.cn2 > 0):
            raise ValueError("cn2 must be positive and finite")

    @property
    def wave_number(self) -> float:
        return 2.0 * math.pi / self.wavelength_lambda


@dataclass(frozen=True)
class GammaGammaParams:
    """Shape pair (alpha, beta) of the Gamma-Gamma intensity law."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite")

    @property
    def scintillation_index(self) -> float:
        """E[I^2]/E[I]^2 - 1 for the unit-mean product construction."""
        return 1.0 / self.alpha + 1.0 / self.beta + 1.0 / (self.alpha * self.beta)


class TurbulenceRegime(enum.Enum):
    """Named (alpha, beta) presets spanning weak to strong scintillation."""

    WEAK = "weak"
    MODERATE = "moderate"
    STRONG = "strong"

    @property
    def params(self) -> GammaGammaParams:
        return _REGIME_PARAMS[self]


_REGIME_PARAMS = {
    TurbulenceRegime.WEAK: GammaGammaParams(alpha=11.6, beta=10.1),
    TurbulenceRegime.MODERATE: GammaGammaParams(alpha=4.0, beta=1.9),
    TurbulenceRegime.STRONG: GammaGammaParams(alpha=4.2, beta=1.4),
}


def hufnagel_valley(profile: AtmosphericProfile) -> float:
    """Refractive-index structure parameter cn2 from the Hufnagel-Valley profile.

    Three-term sum: a wind-driven high-altitude term, a mid-altitude
    exponential, and the ground-level term scaled by A0. The first term is
    implemented with the (1e-5*h)^10 * exp(-h/1000) altitude weighting as
    used by the rest of this package (variant forms exist in the literature).
    """
    h, v, a0 = profile.altitude_h, profile.wind_v, profile.ground_turbulence_a0
    term_wind = 0.00594 * (v / 27.0) ** 2 * (1e-5 * h) ** 10 * math.exp(-h / 1000.0)
    term_mid = 2.7e-16 * math.exp(-h / 1500.0)
    term_ground = a0 * math.exp(-h / 100.0)
    cn2 = term_wind + term_mid + term_ground
    if not (math.isfinite(cn2) and cn2 > 0):
        raise ValueError(f"non-finite or non-positive cn2 ({cn2!r}) from profile {profile}")
    return cn2


def rytov_variance(geometry: LinkGeometry) -> float:
    """Plane-wave Rytov variance 1.23 * cn2 * k^(7/6) * l^(11/6)."""
    s2 = 1.23 * geometry.cn2 * geometry.wave_number ** (7.0 / 6.0) * geometry.distance_l ** (11.0 / 6.0)
    if not math.isfinite(s2):
        raise ValueError(f"non-finite Rytov variance from geometry {geometry}")
    return s2


def gg_params_from_rytov(sigma_r2: float) -> GammaGammaParams:
    """Map a Rytov variance to Gamma-Gamma (alpha, beta) for plane-wave propagation.

    Both shapes diverge as sigma_r2 -> 0 (vanishing scintillation) and
    alpha >= beta throughout.
    """
    if not (math.isfinite(sigma_r2) and sigma_r2 > 0):
        raise ValueError("sigma_r2 must be positive and finite")
    alpha = 1.0 / math.expm1(0.49 * sigma_r2 / (1.0 + 1.11 * sigma_r2 ** 2.4) ** (7.0 / 6.0))
    beta = 1.0 / math.expm1(0.51 * sigma_r2 / (1.0 + 0.69 * sigma_r2 ** 2.4) ** (5.0 / 6.0))
    return GammaGammaParams(alpha=alpha, beta=beta)


def sample_intensity(params: GammaGammaParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` unit-mean Gamma-Gamma intensities.

    Product of two independent Gamma variates, shapes (alpha, beta) with
    scales (1/alpha, 1/beta). The product has the Gamma-Gamma intensity law
    with E[I] = 1; the factorization avoids inverting the Bessel-form CDF.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    large = rng.gamma(shape=params.alpha, scale=1.0 / params.alpha, size=count)
    small = rng.gamma(shape=params.beta, scale=1.0 / params.beta, size=count)
    return large * small


def _log_gamma_pdf(x: np.ndarray, shape: float) -> np.ndarray:
    # Gamma(shape a, scale 1/a): log f = a log a + (a-1) log x - a x - lgamma(a)
    return shape * math.log(shape) + (shape - 1.0) * np.log(x) - shape * x - gammaln(shape)


def gg_pdf(params: GammaGammaParams, intensity: float) -> float:
    """Gamma-Gamma intensity density at `intensity` (> 0).

    Evaluated as the mixing integral of the two Gamma factor densities,
    f(t) = int f_alpha(x) f_beta(t/x) dx/x, by adaptive quadrature in
    log space. Equivalent to the closed Bessel-function form; this module
    uses the density only for validation, never in sampling paths.
    """
    if not (math.isfinite(intensity) and intensity > 0):
        raise ValueError("intensity must be positive and finite")
    a, b, t = params.alpha, params.beta, intensity

    # With x = e^u the integrand becomes f_a(e^u) * f_b(t e^-u); its peak
    # solves a w^2 - (a - b) w - b t = 0 for w = e^u.
    w_peak = ((a - b) + math.sqrt((a - b) ** 2 + 4.0 * a * b * t)) / (2.0 * a)
    u_peak = math.log(w_peak)

    def integrand(u):
        x = math.exp(u)
        lg = _log_gamma_pdf(np.asarray(x), a) + _log_gamma_pdf(np.asarray(t / x), b)
        return math.exp(lg)

    value, _ = integrate.quad(integrand, u_peak - 30.0, u_peak + 30.0, limit=200)
    return max(value, 0.0)
