"""Channel-model tests: profile formulas, Gamma-Gamma parameters, sampler, pdf."""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import kstest

from fsosim.turbulence import (
    AtmosphericProfile,
    GammaGammaParams,
    LinkGeometry,
    TurbulenceRegime,
    gg_params_from_rytov,
    gg_pdf,
    hufnagel_valley,
    rytov_variance,
    sample_intensity,
)

from oracles import gg_cdf_interpolator, ks_critical_value

A0 = 1.7e-14


class TestHufnagelValley:
    def test_ground_level_kills_wind_term(self):
        # at h=0 both exponentials are 1 and the wind term vanishes
        cn2 = hufnagel_valley(AtmosphericProfile(altitude_h=0, wind_v=21, ground_turbulence_a0=A0))
        assert cn2 == pytest.approx(1.727e-14, rel=1e-12)

    def test_frozen_midaltitude_value(self):
        # extended-precision term-by-term evaluation
        cn2 = hufnagel_valley(AtmosphericProfile(altitude_h=1000, wind_v=27, ground_turbulence_a0=A0))
        assert cn2 == pytest.approx(1.3939444279680090e-16, rel=1e-12)

    def test_decays_monotonically_in_the_tail(self):
        values = [
            hufnagel_valley(AtmosphericProfile(altitude_h=h, wind_v=27, ground_turbulence_a0=A0))
            for h in np.linspace(20_000, 120_000, 30)
        ]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-25

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(altitude_h=-1, wind_v=5, ground_turbulence_a0=A0),
            dict(altitude_h=0, wind_v=-2, ground_turbulence_a0=A0),
            dict(altitude_h=0, wind_v=5, ground_turbulence_a0=0.0),
            dict(altitude_h=float("nan"), wind_v=5, ground_turbulence_a0=A0),
        ],
    )
    def test_profile_invariants(self, kwargs):
        with pytest.raises(ValueError):
            AtmosphericProfile(**kwargs)


class TestRytovVariance:
    def test_frozen_value(self):
        geo = LinkGeometry(wavelength_lambda=1550e-9, distance_l=1000, cn2=1e-14)
        assert rytov_variance(geo) == pytest.approx(0.19909543851127026, rel=1e-12)

    def test_linear_in_cn2(self):
        base = rytov_variance(LinkGeometry(wavelength_lambda=1550e-9, distance_l=1000, cn2=1e-14))
        third = rytov_variance(LinkGeometry(wavelength_lambda=1550e-9, distance_l=1000, cn2=1e-14 / 3))
        assert third == pytest.approx(base / 3, rel=1e-12)

    def test_distance_power_law(self):
        short = rytov_variance(LinkGeometry(wavelength_lambda=850e-9, distance_l=500, cn2=5e-15))
        long = rytov_variance(LinkGeometry(wavelength_lambda=850e-9, distance_l=1000, cn2=5e-15))
        assert long / short == pytest.approx(2 ** (11 / 6), rel=1e-12)

    def test_rejects_nonoptical_wavelength(self):
        with pytest.raises(ValueError):
            LinkGeometry(wavelength_lambda=1.0, distance_l=1000, cn2=1e-14)


class TestGammaGammaParams:
    def test_frozen_value_at_unit_rytov(self):
        params = gg_params_from_rytov(1.0)
        assert params.alpha == pytest.approx(4.393859025392147, rel=1e-12)
        assert params.beta == pytest.approx(2.5636319795036950, rel=1e-12)

    def test_small_turbulence_limit(self):
        params = gg_params_from_rytov(1e-6)
        assert params.alpha > 1e5
        assert params.beta > 1e5

    def test_alpha_dominates_beta(self):
        for s2 in np.geomspace(1e-3, 1e2, 60):
            params = gg_params_from_rytov(float(s2))
            assert params.alpha >= params.beta, f"alpha < beta at sigma_R2={s2}"

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            gg_params_from_rytov(0.0)
        with pytest.raises(ValueError):
            gg_params_from_rytov(-1.0)

    def test_regime_presets(self):
        assert TurbulenceRegime.STRONG.params == GammaGammaParams(4.2, 1.4)
        assert TurbulenceRegime.MODERATE.params == GammaGammaParams(4.0, 1.9)
        assert TurbulenceRegime.WEAK.params == GammaGammaParams(11.6, 10.1)


class TestSampler:
    def test_unit_mean(self, regime, rng):
        samples = sample_intensity(regime.params, 1_000_000, rng)
        assert abs(samples.mean() - 1.0) < 0.01

    def test_moment_identity(self, regime, rng):
        params = regime.params
        samples = sample_intensity(params, 1_000_000, rng)
        expected = params.scintillation_index
        empirical = samples.var()
        assert abs(empirical / expected - 1.0) < 0.02

    def test_strong_preset_scintillation_value(self):
        # 1/alpha + 1/beta + 1/(alpha beta) for (4.2, 1.4)
        assert TurbulenceRegime.STRONG.params.scintillation_index == pytest.approx(1.1224, abs=5e-5)

    def test_regime_ordering(self, rng):
        si = {}
        for regime in TurbulenceRegime:
            samples = sample_intensity(regime.params, 200_000, rng)
            si[regime] = samples.var() / samples.mean() ** 2
        assert si[TurbulenceRegime.STRONG] > si[TurbulenceRegime.MODERATE] > si[TurbulenceRegime.WEAK]

    def test_deterministic_given_seed(self):
        params = TurbulenceRegime.STRONG.params
        a = sample_intensity(params, 1000, np.random.default_rng(7))
        b = sample_intensity(params, 1000, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_all_positive(self, rng):
        samples = sample_intensity(GammaGammaParams(0.8, 0.5), 100_000, rng)
        assert (samples > 0).all()

    def test_rejects_bad_count(self, rng):
        with pytest.raises(ValueError):
            sample_intensity(TurbulenceRegime.WEAK.params, 0, rng)


class TestPdf:
    def test_normalization_and_mean(self):
        params = TurbulenceRegime.STRONG.params
        norm, _ = integrate.quad(lambda t: gg_pdf(params, t), 0, np.inf, limit=300)
        assert abs(norm - 1.0) < 1e-4
        mean, _ = integrate.quad(lambda t: t * gg_pdf(params, t), 0, np.inf, limit=300)
        assert abs(mean - 1.0) < 1e-4

    def test_nonnegative(self):
        params = TurbulenceRegime.MODERATE.params
        for t in np.geomspace(1e-4, 50, 40):
            assert gg_pdf(params, float(t)) >= 0.0

    def test_rejects_nonpositive_intensity(self):
        with pytest.raises(ValueError):
            gg_pdf(TurbulenceRegime.WEAK.params, 0.0)
        with pytest.raises(ValueError):
            gg_pdf(TurbulenceRegime.WEAK.params, -0.5)

    @pytest.mark.slow
    def test_sampler_matches_integrated_pdf(self, rng):
        params = TurbulenceRegime.STRONG.params
        samples = sample_intensity(params, 100_000, rng)
        cdf = gg_cdf_interpolator(
            params.alpha, params.beta, 0.5 * samples.min(), 2.0 * samples.max()
        )
        stat = kstest(samples, cdf).statistic
        assert stat < ks_critical_value(len(samples), 0.01)
