"""Propagation, diversity combining, and maximum-likelihood detection.

Complex-baseband model: every receive aperture sees the transmitted symbol
scaled by the sum of its per-transmit-aperture intensities, plus circular
Gaussian noise, all multiplied by the photodetector conversion efficiency.
Repetition transmit diversity sends the same symbol from every aperture
with no power renormalization unless `normalize_tx_power` is set.

The module-level functions operate on single symbols through small value
types; the `*_block` helpers are the vectorized equivalents used by the
Monte Carlo loops and produce identical decisions for identical inputs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .modem import Constellation
from .turbulence import GammaGammaParams, sample_intensity


class CombinerKind(enum.Enum):
    SC = "sc"
    EGC = "egc"
    MRC = "mrc"


@dataclass(frozen=True)
class LinkConfig:
    """Aperture counts, conversion efficiency, and the turbulence law.

    `turbulence=None` bypasses fading entirely (every intensity is exactly
    1), which turns the link into a plain AWGN channel for validation runs.
    """

    n_t: int = 1
    n_r: int = 1
    eta: float = 1.0
    turbulence: GammaGammaParams | None = None
    normalize_tx_power: bool = False

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise ValueError("aperture counts must be >= 1")
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ValueError("eta must be positive and finite")

    @property
    def tx_scale(self) -> float:
        """Per-aperture amplitude scale; 1 unless transmit power is normalized."""
        return 1.0 / math.sqrt(self.n_t) if self.normalize_tx_power else 1.0


@dataclass(frozen=True)
class ChannelRealization:
    """n_r x n_t matrix of positive intensities for one symbol interval."""

    intensities: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.intensities, dtype=float)
        object.__setattr__(self, "intensities", arr)
        if arr.ndim != 2:
            raise ValueError("intensities must be a 2-D matrix")
        if not (np.isfinite(arr).all() and (arr > 0).all()):
            raise ValueError("every intensity must be positive and finite")

    @property
    def row_sums(self) -> np.ndarray:
        return self.intensities.sum(axis=1)


@dataclass(frozen=True)
class CombinedObservation:
    """Post-combiner scalar y with the gain g multiplying the symbol hypothesis."""

    y: complex
    g: float

    def __post_init__(self):
        if not (math.isfinite(self.g) and self.g > 0):
            raise ValueError("effective gain must be positive and finite")


def sample_channel(cfg: LinkConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one intensity matrix; all entries 1 when turbulence is bypassed."""
    if cfg.turbulence is None:
        return ChannelRealization(intensities=np.ones((cfg.n_r, cfg.n_t)))
    draws = sample_intensity(cfg.turbulence, cfg.n_r * cfg.n_t, rng)
    return ChannelRealization(intensities=draws.reshape(cfg.n_r, cfg.n_t))


def propagate(
    x: complex,
    ch: ChannelRealization,
    cfg: LinkConfig,
    noise_var: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Receive-aperture observations y_i = eta * (sum_j I_ij) * x + eta * n_i.

    Noise is circular complex Gaussian with total variance `noise_var` per
    branch (half per real dimension). `rng` may be omitted when noise_var
    is zero.
    """
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    gains = ch.row_sums * cfg.tx_scale
    signal = cfg.eta * gains * x
    if noise_var == 0.0:
        return signal.astype(np.complex128)
    if rng is None:
        raise ValueError("rng required when noise_var > 0")
    noise = complex_noise(rng, noise_var, size=len(gains))
    return signal + cfg.eta * noise


def complex_noise(rng: np.random.Generator, variance: float, size) -> np.ndarray:
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def combine(
    obs: np.ndarray,
    ch: ChannelRealization,
    cfg: LinkConfig,
    kind: CombinerKind,
) -> CombinedObservation:
    """Collapse the receive branches into one (y, g) pair.

    SC keeps the branch with the largest intensity sum (lowest index on
    ties). EGC adds branches unweighted. MRC weights each branch by its
    intensity sum, which squares the eta bookkeeping in the gain.
    """
    obs = np.asarray(obs, dtype=np.complex128)
    rs = ch.row_sums * cfg.tx_scale
    if obs.shape != rs.shape:
        raise ValueError(f"expected {rs.shape[0]} branch observations, got {obs.shape}")
    if kind is CombinerKind.SC:
        p = int(np.argmax(rs))
        return CombinedObservation(y=complex(obs[p]), g=cfg.eta * float(rs[p]))
    if kind is CombinerKind.EGC:
        return CombinedObservation(y=complex(obs.sum()), g=cfg.eta * float(rs.sum()))
    if kind is CombinerKind.MRC:
        y = complex((rs * obs).sum())
        return CombinedObservation(y=y, g=cfg.eta ** 2 * float((rs ** 2).sum()))
    raise ValueError(f"unknown combiner {kind!r}")


def ml_detect(co: CombinedObservation, constellation: Constellation) -> int:
    """Brute-force argmin over |y - g * x_k|^2; ties break to the lowest index."""
    metrics = np.abs(co.y - co.g * constellation.points) ** 2
    return int(np.argmin(metrics))


def equalize(co: CombinedObservation) -> complex:
    """Gain-normalized observation y / g."""
    if co.g <= 0:
        raise ValueError("effective gain must be positive")
    return co.y / co.g


# --- vectorized block paths (one row per symbol) ---


def sample_rowsums_block(cfg: LinkConfig, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, n_r) per-branch intensity sums over the transmit apertures."""
    if cfg.turbulence is None:
        return np.full((count, cfg.n_r), float(cfg.n_t))
    draws = sample_intensity(cfg.turbulence, count * cfg.n_r * cfg.n_t, rng)
    return draws.reshape(count, cfg.n_r, cfg.n_t).sum(axis=2)


def propagate_block(
    x: np.ndarray,
    rowsums: np.ndarray,
    cfg: LinkConfig,
    noise_var: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """(count, n_r) branch observations for a block of symbols."""
    gains = rowsums * cfg.tx_scale
    signal = cfg.eta * gains * x[:, None]
    if noise_var == 0.0:
        return signal.astype(np.complex128)
    return signal + cfg.eta * complex_noise(rng, noise_var, size=gains.shape)


def combine_block(
    rowsums: np.ndarray,
    branch_obs: np.ndarray,
    cfg: LinkConfig,
    kind: CombinerKind,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized combining.

    Returns (y, g, a): the combined observation, the detection gain used in
    the ML metric, and the actual coefficient multiplying the symbol inside
    y. The two gains differ only for MRC with eta != 1.
    """
    rs = rowsums * cfg.tx_scale
    if kind is CombinerKind.SC:
        sel = np.argmax(rs, axis=1)
        rows = np.arange(rs.shape[0])
        g = cfg.eta * rs[rows, sel]
        return branch_obs[rows, sel], g, g
    if kind is CombinerKind.EGC:
        g = cfg.eta * rs.sum(axis=1)
        return branch_obs.sum(axis=1), g, g
    if kind is CombinerKind.MRC:
        y = (rs * branch_obs).sum(axis=1)
        sum_sq = (rs ** 2).sum(axis=1)
        return y, cfg.eta ** 2 * sum_sq, cfg.eta * sum_sq
    raise ValueError(f"unknown combiner {kind!r}")


def ml_detect_block(y: np.ndarray, g: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Row-wise brute-force argmin of |y - g * x_k|^2 over the constellation."""
    metrics = np.abs(y[:, None] - g[:, None] * constellation.points[None, :]) ** 2
    return np.argmin(metrics, axis=1)


def noise_variance_from_esn0(esn0_db: float) -> float:
    """Total complex noise variance for unit symbol energy at the given Es/N0."""
    return 10.0 ** (-esn0_db / 10.0)
