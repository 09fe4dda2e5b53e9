import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irplab.metrics import (
    PSNR_RANGE,
    SSIM_RANGE,
    DegenerateSeriesError,
    average_ranks,
    normalize_metric,
    plcc,
    psnr,
    srcc,
    ssim,
)

from conftest import quant


class TestPsnr:
    def test_identical_images_capped(self, rng):
        img = quant(rng.integers(0, 256, (16, 16)))
        assert psnr(img, img) == 100.0

    def test_black_vs_one_level(self):
        # MSE = 1, so 10*log10(255^2) = 48.1308 dB
        a = quant(np.zeros((8, 8)))
        b = quant(np.ones((8, 8)))
        assert abs(psnr(a, b) - 48.13080361) < 1e-6

    def test_full_contrast(self):
        a = quant(np.zeros((8, 8)))
        b = quant(np.full((8, 8), 255))
        assert abs(psnr(a, b) - 0.0) < 1e-12

    def test_explicit_mse(self):
        a = quant(np.array([[0, 0], [0, 0]]))
        b = quant(np.array([[10, 0], [0, 0]]))
        # one pixel off by 10 in each of 3 channels: MSE = 300/12 = 25
        expected = 10 * np.log10(255**2 / 25)
        assert abs(psnr(a, b) - expected) < 1e-10

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(quant(np.zeros((4, 4))), quant(np.zeros((5, 4))))

    def test_symmetry(self, rng):
        a = quant(rng.integers(0, 256, (12, 12)))
        b = quant(rng.integers(0, 256, (12, 12)))
        assert psnr(a, b) == psnr(b, a)


class TestSsim:
    def test_identical_is_one(self, rng):
        img = quant(rng.integers(0, 256, (16, 16)))
        assert abs(ssim(img, img) - 1.0) < 1e-12

    def test_bounded(self, rng):
        a = quant(rng.integers(0, 256, (20, 20)))
        b = quant(rng.integers(0, 256, (20, 20)))
        s = ssim(a, b)
        assert -1.0 <= s <= 1.0

    def test_degrades_with_noise(self, rng):
        base = rng.integers(40, 216, (32, 32))
        a = quant(base)
        scores = []
        for sigma in (5, 20, 60):
            noisy = np.clip(base + rng.normal(0, sigma, base.shape), 0, 255)
            scores.append(ssim(a, quant(noisy)))
        assert scores[0] > scores[1] > scores[2]

    def test_constant_pair_closed_form(self):
        # zero variance on both sides: score is (2*mu_x*mu_y+c1)/(mu_x^2+mu_y^2+c1)
        a = quant(np.full((8, 8), 100))
        b = quant(np.full((8, 8), 120))
        c1 = (0.01 * 255) ** 2
        expected = (2 * 100 * 120 + c1) / (100**2 + 120**2 + c1)
        assert abs(ssim(a, b) - expected) < 1e-12

    def test_window_larger_than_image(self):
        with pytest.raises(ValueError):
            ssim(quant(np.zeros((4, 4))), quant(np.zeros((4, 4))), window=8)

    def test_symmetry(self, rng):
        a = quant(rng.integers(0, 256, (16, 16)))
        b = quant(rng.integers(0, 256, (16, 16)))
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12


class TestNormalize:
    def test_endpoints_and_midpoint(self):
        assert normalize_metric(10.0, PSNR_RANGE) == 0.0
        assert normalize_metric(50.0, PSNR_RANGE) == 1.0
        assert normalize_metric(30.0, PSNR_RANGE) == 0.5

    def test_clamps(self):
        assert normalize_metric(-5.0, PSNR_RANGE) == 0.0
        assert normalize_metric(120.0, PSNR_RANGE) == 1.0

    def test_lower_better(self):
        assert normalize_metric(0.25, SSIM_RANGE, higher_better=False) == 0.75


class TestRanks:
    def test_no_ties(self):
        assert average_ranks([30.0, 10.0, 20.0]).tolist() == [3.0, 1.0, 2.0]

    def test_ties_get_mean_rank(self):
        assert average_ranks([1.0, 2.0, 2.0, 3.0]).tolist() == [1.0, 2.5, 2.5, 4.0]

    def test_all_equal(self):
        assert average_ranks([7.0, 7.0, 7.0]).tolist() == [2.0, 2.0, 2.0]


def _brute_spearman(x, y):
    """Pearson of average ranks, computed from first principles."""
    def ranks(v):
        return [1 + sum(1 for w in v if w < u) + (sum(1 for w in v if w == u) - 1) / 2 for u in v]

    rx, ry = np.array(ranks(x)), np.array(ranks(y))
    sx = np.sqrt(np.sum((rx - rx.mean()) ** 2))
    sy = np.sqrt(np.sum((ry - ry.mean()) ** 2))
    if sx == 0 or sy == 0:
        return 0.0
    return float(np.sum((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


class TestCorrelation:
    def test_srcc_perfect(self):
        assert abs(srcc([1, 2, 3, 4], [10, 20, 30, 40]) - 1.0) < 1e-12
        assert abs(srcc([1, 2, 3, 4], [5, 4, 3, 2]) + 1.0) < 1e-12

    def test_srcc_single_swap(self):
        # classic formula: 1 - 6*sum(d^2)/(n(n^2-1)) = 1 - 12/60
        assert abs(srcc([1, 2, 3, 4], [1, 3, 2, 4]) - 0.8) < 1e-12

    def test_srcc_monotone_invariance(self, rng):
        x = rng.normal(size=30)
        y = rng.normal(size=30)
        assert abs(srcc(x, y) - srcc(np.exp(x), y**3)) < 1e-12

    def test_plcc_hand_computed(self):
        # cov = 3, sx = sqrt(2), sy = sqrt(14/3): r = 9/sqrt(84)
        assert abs(plcc([0, 1, 2], [0, 1, 3]) - 9 / np.sqrt(84)) < 1e-12

    def test_degenerate_default_zero(self):
        assert srcc([1, 1, 1], [1, 2, 3]) == 0.0
        assert plcc([1, 2, 3], [5, 5, 5]) == 0.0

    def test_degenerate_raises_on_request(self):
        with pytest.raises(DegenerateSeriesError):
            srcc([1, 1, 1], [1, 2, 3], raise_degenerate=True)
        with pytest.raises(DegenerateSeriesError):
            plcc([4, 4], [1, 2], raise_degenerate=True)

    def test_too_short(self):
        with pytest.raises(ValueError):
            srcc([1.0], [2.0])

    def test_srcc_exhaustive_small_alphabet(self):
        # every pair of sequences over {1,2,3}, lengths 2..4, against a
        # from-scratch implementation (ties included)
        for n in (2, 3, 4):
            for x in itertools.product((1, 2, 3), repeat=n):
                for y in itertools.product((1, 2, 3), repeat=n):
                    assert abs(srcc(x, y) - _brute_spearman(x, y)) < 1e-12

    @given(
        st.lists(st.integers(0, 5), min_size=2, max_size=6),
        st.data(),
    )
    @settings(max_examples=100, deadline=None)
    def test_srcc_matches_brute_force(self, x, data):
        y = data.draw(st.lists(st.integers(0, 5), min_size=len(x), max_size=len(x)))
        assert abs(srcc(x, y) - _brute_spearman(x, y)) < 1e-12
