"""Independent oracles the tests check the library against.

Everything here is deliberately written as the straight-line textbook
computation (closed forms, plain loops, quadrature of factor densities) so
it shares no code path with the implementation under test.
"""

import math

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import gammainc, gammaln
from scipy.stats import norm


def awgn_qpsk_ser(esn0_db: float) -> float:
    """SER of Gray QPSK over complex AWGN: 2Q(sqrt(g)) - Q(sqrt(g))^2."""
    gamma = 10.0 ** (esn0_db / 10.0)
    q = norm.sf(math.sqrt(gamma))
    return 2.0 * q - q * q


def gg_cdf(alpha: float, beta: float, t: float) -> float:
    """CDF of the unit-mean Gamma-Gamma law via the Gamma factor mixture.

    P(XY <= t) = E_X[F_beta(t / X)] with X ~ Gamma(alpha, 1/alpha) and
    F_beta the Gamma(beta, 1/beta) CDF, integrated in log space.
    """
    if t <= 0:
        return 0.0

    def integrand(u):
        # log density of log(X) at u, times the conditional Gamma CDF
        logf = alpha * math.log(alpha) + alpha * u - alpha * math.exp(u) - gammaln(alpha)
        return math.exp(logf) * gammainc(beta, beta * t * math.exp(-u))

    value, _ = integrate.quad(integrand, -40.0, 40.0, limit=200)
    return min(max(value, 0.0), 1.0)


def gg_cdf_interpolator(alpha: float, beta: float, lo: float, hi: float, n: int = 600):
    """Monotone interpolant of the Gamma-Gamma CDF over [lo, hi] (log grid)."""
    grid = np.geomspace(lo, hi, n)
    values = np.array([gg_cdf(alpha, beta, t) for t in grid])
    interp = PchipInterpolator(grid, values, extrapolate=False)

    def cdf(t):
        t = np.asarray(t, dtype=float)
        out = np.where(t <= lo, 0.0, np.where(t >= hi, 1.0, interp(np.clip(t, lo, hi))))
        return out

    return cdf


def brute_force_detect(y: complex, g: float, points: np.ndarray) -> int:
    """Plain-loop argmin of |y - g x_k|^2 with lowest-index tie break."""
    best_idx, best_metric = 0, float("inf")
    for k, point in enumerate(points):
        metric = abs(y - g * point) ** 2
        if metric < best_metric:
            best_idx, best_metric = k, metric
    return best_idx


def ks_critical_value(n: int, significance: float = 0.01) -> float:
    """Asymptotic Kolmogorov-Smirnov critical distance."""
    return math.sqrt(-0.5 * math.log(significance / 2.0)) / math.sqrt(n)


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    kernel = np.ones(window) / window
    return np.convolve(np.asarray(x, dtype=float), kernel, mode="valid")
