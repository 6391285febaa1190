"""Constellations, symbol mapping, and power normalization.

Every constellation in this package (fixed QAM or learned) carries unit
average symbol energy, so Es/N0 means the same thing for all transmitters.
Symbol streams are plain integer arrays with values in [0, M).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

ENERGY_TOL = 1e-12
MIN_POINT_SEPARATION = 1e-9


@dataclass(frozen=True)
class Constellation:
    """Ordered list of M complex points with unit average energy."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or len(pts) < 2:
            raise ValueError("constellation needs at least 2 points in a flat array")
        energy = float(np.mean(np.abs(pts) ** 2))
        if abs(energy - 1.0) > ENERGY_TOL:
            raise ValueError(f"average energy {energy!r} is not 1 within {ENERGY_TOL}")
        if min_pairwise_distance(pts) <= MIN_POINT_SEPARATION:
            raise ValueError("constellation has (near-)coincident points")

    @property
    def order(self) -> int:
        return len(self.points)

    def to_csv(self, path) -> None:
        """Write rows of (index, re, im) for inspection of the geometry."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "re", "im"])
            for idx, pt in enumerate(self.points):
                writer.writerow([idx, repr(float(pt.real)), repr(float(pt.imag))])


def min_pairwise_distance(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=np.complex128)
    diff = np.abs(pts[:, None] - pts[None, :])
    diff[np.diag_indices_from(diff)] = np.inf
    return float(diff.min())


def _gray_decode(bits: int) -> int:
    # inverse of g = p ^ (p >> 1)
    pos = bits
    shift = 1
    while (bits >> shift) > 0:
        pos ^= bits >> shift
        shift += 1
    return pos


def qam_constellation(order: int) -> Constellation:
    """Square Gray-coded QAM on odd-integer levels, scaled to unit energy.

    The index of each point splits into I-axis bits (high half) and Q-axis
    bits (low half); each half is Gray-coded along its axis so that
    minimum-distance neighbors differ in exactly one index bit.
    """
    if order not in (4, 16):
        raise ValueError(f"unsupported modulation order {order} (expected 4 or 16)")
    side = int(round(order ** 0.5))
    assert side * side == order
    bits_per_axis = side.bit_length() - 1

    levels = np.arange(side) * 2 - (side - 1)
    points = np.empty(order, dtype=np.complex128)
    for index in range(order):
        i_bits = index >> bits_per_axis
        q_bits = index & (side - 1)
        re = levels[_gray_decode(i_bits)]
        im = levels[_gray_decode(q_bits)]
        points[index] = re + 1j * im
    scale = np.sqrt(np.mean(np.abs(points) ** 2))
    return Constellation(points=points / scale)


def modulate(stream: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Map symbol indices to constellation points."""
    idx = np.asarray(stream, dtype=np.int64)
    if idx.size == 0:
        return np.empty(0, dtype=np.complex128)
    if idx.min() < 0 or idx.max() >= constellation.order:
        raise ValueError("symbol index out of range for this constellation")
    return constellation.points[idx]


def one_hot(index: int, order: int) -> np.ndarray:
    """Length-`order` indicator vector with a 1 at `index`."""
    if not 0 <= index < order:
        raise ValueError(f"index {index} out of range [0, {order})")
    vec = np.zeros(order)
    vec[index] = 1.0
    return vec


def one_hot_batch(indices: np.ndarray, order: int) -> np.ndarray:
    """Stack of one-hot rows, one per symbol index."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= order):
        raise ValueError("symbol index out of range")
    out = np.zeros((len(idx), order))
    out[np.arange(len(idx)), idx] = 1.0
    return out


def normalize_power(points: np.ndarray) -> Constellation:
    """Scale a point cloud by one positive factor to unit average energy."""
    pts = np.asarray(points, dtype=np.complex128)
    energy = float(np.mean(np.abs(pts) ** 2))
    if energy <= 0.0:
        raise ValueError("cannot normalize an all-zero constellation")
    return Constellation(points=pts / np.sqrt(energy))
