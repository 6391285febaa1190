"""Constellation construction, mapping, and normalization tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsosim.modem import (
    Constellation,
    min_pairwise_distance,
    modulate,
    normalize_power,
    one_hot,
    one_hot_batch,
    qam_constellation,
)


class TestQamConstellation:
    def test_qpsk_points(self):
        c = qam_constellation(4)
        expected = {(s_re + 1j * s_im) / np.sqrt(2) for s_re in (-1, 1) for s_im in (-1, 1)}
        assert set(np.round(c.points, 12)) == {complex(round(p.real, 12), round(p.imag, 12)) for p in expected}
        np.testing.assert_allclose(np.abs(c.points), 1.0, atol=1e-12)

    def test_qam16_grid(self):
        c = qam_constellation(16)
        scaled = c.points * np.sqrt(10)
        assert set(np.round(scaled.real, 9)) == {-3.0, -1.0, 1.0, 3.0}
        assert set(np.round(scaled.imag, 9)) == {-3.0, -1.0, 1.0, 3.0}
        assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_qam16_min_distance(self):
        c = qam_constellation(16)
        assert min_pairwise_distance(c.points) == pytest.approx(2 / np.sqrt(10), rel=1e-12)

    @pytest.mark.parametrize("order", [4, 16])
    def test_gray_labeling(self, order):
        # minimum-distance neighbors differ in exactly one index bit
        c = qam_constellation(order)
        dmin = min_pairwise_distance(c.points)
        for i in range(order):
            for j in range(i + 1, order):
                if abs(c.points[i] - c.points[j]) < dmin * 1.001:
                    assert bin(i ^ j).count("1") == 1, f"neighbors {i},{j} differ in >1 bit"

    @pytest.mark.parametrize("order", [2, 8, 32, 64])
    def test_unsupported_order(self, order):
        with pytest.raises(ValueError):
            qam_constellation(order)


class TestModulate:
    def test_empty_stream(self):
        out = modulate(np.array([], dtype=int), qam_constellation(4))
        assert out.shape == (0,)

    def test_repeated_index(self):
        c = qam_constellation(4)
        out = modulate(np.array([0, 0, 0]), c)
        np.testing.assert_array_equal(out, np.repeat(c.points[0], 3))

    @pytest.mark.parametrize("order", [4, 16])
    def test_noiseless_round_trip(self, order):
        c = qam_constellation(order)
        stream = np.arange(order)
        samples = modulate(stream, c)
        # nearest-point demap
        recovered = np.argmin(np.abs(samples[:, None] - c.points[None, :]), axis=1)
        np.testing.assert_array_equal(recovered, stream)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            modulate(np.array([4]), qam_constellation(4))


class TestOneHot:
    def test_basis_vectors(self):
        np.testing.assert_array_equal(one_hot(0, 4), [1, 0, 0, 0])
        np.testing.assert_array_equal(one_hot(3, 4), [0, 0, 0, 1])

    @given(order=st.sampled_from([4, 16]), data=st.data())
    def test_sum_is_one_and_argmax_inverts(self, order, data):
        index = data.draw(st.integers(min_value=0, max_value=order - 1))
        vec = one_hot(index, order)
        assert vec.sum() == 1.0
        assert int(np.argmax(vec)) == index

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            one_hot(4, 4)
        with pytest.raises(ValueError):
            one_hot(-1, 4)

    def test_batch_matches_single(self, rng):
        idx = rng.integers(0, 16, size=50)
        batch = one_hot_batch(idx, 16)
        for row, i in zip(batch, idx):
            np.testing.assert_array_equal(row, one_hot(int(i), 16))


class TestNormalizePower:
    def test_idempotent(self, rng):
        pts = rng.normal(size=16) + 1j * rng.normal(size=16)
        once = normalize_power(pts)
        twice = normalize_power(once.points)
        np.testing.assert_allclose(once.points, twice.points, atol=1e-12)

    @given(scale=st.floats(min_value=1e-3, max_value=1e3))
    @settings(max_examples=30)
    def test_scale_invariant(self, scale):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=8) + 1j * rng.normal(size=8)
        np.testing.assert_allclose(
            normalize_power(pts).points, normalize_power(scale * pts).points, atol=1e-9
        )

    def test_unit_energy(self, rng):
        pts = 5.0 * (rng.normal(size=16) + 1j * rng.normal(size=16))
        c = normalize_power(pts)
        assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_all_zero(self):
        with pytest.raises(ValueError):
            normalize_power(np.zeros(4, dtype=complex))


class TestConstellationType:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            Constellation(points=np.array([1.0 + 0j, 2.0 + 0j]))

    def test_rejects_coincident_points(self):
        pts = np.array([1.0 + 0j, 1.0 + 0j, -1.0 + 0j, -1.0 + 0j])
        with pytest.raises(ValueError):
            Constellation(points=pts / np.sqrt(np.mean(np.abs(pts) ** 2)))

    def test_csv_round_trip(self, tmp_path):
        c = qam_constellation(16)
        path = tmp_path / "c.csv"
        c.to_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "index,re,im"
        parsed = np.array([complex(float(r.split(",")[1]), float(r.split(",")[2])) for r in rows[1:]])
        np.testing.assert_array_equal(parsed, c.points)
