import numpy as np
import pytest

from irplab.imaging import ExposureConfig, FlowField, LinearImage, QuantizedImage, develop_to_srgb
from irplab.metrics import psnr
from irplab.restore import (
    HYPER_GRIDS,
    RESTORER_NAMES,
    CaptureSample,
    IrpRecord,
    RestorerId,
    _psf_to_otf,
    fit_restorer_per_exposure,
    generate_irp_labels,
    motion_psf,
    read_labels_csv,
    restore,
    write_labels_csv,
)

from conftest import quant


def _noisy_sample(seed, sigma=20.0, exposure_index=0, size=32):
    # smooth clean image so denoising can actually help
    rng = np.random.default_rng(seed)
    ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    clean = 128 + 60 * np.sin(2 * np.pi * xs / size * rng.uniform(1, 3)) * np.cos(
        2 * np.pi * ys / size * rng.uniform(1, 3)
    )
    clean = np.floor(np.clip(clean, 0, 255))
    noisy = np.floor(np.clip(clean + rng.normal(0, sigma, clean.shape), 0, 255))
    return CaptureSample(
        scene_id=f"s{seed}",
        exposure_index=exposure_index,
        capture=quant(noisy),
        ground_truth=quant(clean),
        kernel_hint=motion_psf(FlowField(np.zeros((size, size)), np.zeros((size, size))), ExposureConfig()),
    )


class TestMotionPsf:
    def test_zero_flow_is_delta(self):
        psf = motion_psf(FlowField(np.zeros((8, 8)), np.zeros((8, 8))), ExposureConfig(delta_t=1.0))
        r = psf.shape[0] // 2
        assert psf[r, r] == 1.0
        assert psf.sum() == 1.0

    def test_sums_to_one(self):
        for mu in (0.3, 1.7, 4.0):
            flow = FlowField(np.full((8, 8), mu), np.full((8, 8), -mu / 2))
            psf = motion_psf(flow, ExposureConfig(delta_t=1.3))
            assert abs(psf.sum() - 1.0) < 1e-12

    def test_horizontal_integer_flow(self):
        # flow (3, 0): four taps at x offsets 0..3, equal weight
        flow = FlowField(np.full((8, 8), 3.0), np.zeros((8, 8)))
        psf = motion_psf(flow, ExposureConfig(delta_t=1.0))
        r = psf.shape[0] // 2
        for k in range(4):
            assert abs(psf[r, r + k] - 0.25) < 1e-12
        assert abs(psf.sum() - 1.0) < 1e-12

    def test_exposure_scales_length(self):
        flow = FlowField(np.full((8, 8), 4.0), np.zeros((8, 8)))
        short = motion_psf(flow, ExposureConfig(delta_t=0.25))
        long = motion_psf(flow, ExposureConfig(delta_t=1.0))
        assert np.count_nonzero(long) > np.count_nonzero(short)

    def test_otf_dc_gain(self):
        flow = FlowField(np.full((8, 8), 2.5), np.full((8, 8), 1.0))
        otf = _psf_to_otf(motion_psf(flow, ExposureConfig()), (16, 16))
        assert abs(otf[0, 0] - 1.0) < 1e-12


class TestRestorers:
    def test_gaussian_zero_sigma_identity(self, rng):
        img = quant(rng.integers(0, 256, (16, 16)))
        out = restore(RestorerId("gaussian-denoise", (0.0,)), img)
        assert np.array_equal(out.data, img.data)

    def test_rl_zero_iterations_identity(self, rng):
        img = quant(rng.integers(1, 255, (16, 16)))
        psf = motion_psf(FlowField(np.zeros((16, 16)), np.zeros((16, 16))), ExposureConfig())
        out = restore(RestorerId("richardson-lucy", (0.0,)), img, kernel_hint=psf)
        assert np.array_equal(out.data, img.data)

    def test_gaussian_denoises(self):
        s = _noisy_sample(0)
        noisy_psnr = psnr(s.capture, s.ground_truth)
        out = restore(RestorerId("gaussian-denoise", (1.2,)), s.capture)
        assert psnr(out, s.ground_truth) > noisy_psnr

    def test_bilateral_denoises(self):
        s = _noisy_sample(1)
        noisy_psnr = psnr(s.capture, s.ground_truth)
        out = restore(RestorerId("bilateral-denoise", (0.2, 4.0)), s.capture)
        assert psnr(out, s.ground_truth) > noisy_psnr

    def test_wiener_inverts_known_blur(self):
        # blur synthetically with the exact PSF, then deconvolve
        rng = np.random.default_rng(2)
        clean = rng.random((32, 32, 3)) * 0.8 + 0.1
        flow = FlowField(np.full((32, 32), 4.0), np.zeros((32, 32)))
        cfg = ExposureConfig(delta_t=1.0)
        psf = motion_psf(flow, cfg)
        otf = _psf_to_otf(psf, (32, 32))
        blurred = np.stack(
            [np.real(np.fft.ifft2(otf * np.fft.fft2(clean[..., c]))) for c in range(3)], axis=-1
        )
        q_clean = quant(np.floor(clean * 255 + 0.5))
        q_blur = quant(np.clip(np.floor(blurred * 255 + 0.5), 0, 255))
        out = restore(RestorerId("wiener-deconv", (1e-4,)), q_blur, kernel_hint=psf)
        assert psnr(out, q_clean) > psnr(q_blur, q_clean) + 3.0

    def test_rl_improves_blur(self):
        rng = np.random.default_rng(3)
        clean = rng.random((32, 32, 3)) * 0.8 + 0.1
        flow = FlowField(np.full((32, 32), 3.0), np.zeros((32, 32)))
        psf = motion_psf(flow, ExposureConfig())
        otf = _psf_to_otf(psf, (32, 32))
        blurred = np.stack(
            [np.real(np.fft.ifft2(otf * np.fft.fft2(clean[..., c]))) for c in range(3)], axis=-1
        )
        q_clean = quant(np.floor(clean * 255 + 0.5))
        q_blur = quant(np.clip(np.floor(blurred * 255 + 0.5), 0, 255))
        out = restore(RestorerId("richardson-lucy", (30.0,)), q_blur, kernel_hint=psf)
        assert psnr(out, q_clean) > psnr(q_blur, q_clean)

    def test_deconv_requires_psf(self, rng):
        img = quant(rng.integers(0, 256, (16, 16)))
        with pytest.raises(ValueError):
            restore(RestorerId("wiener-deconv", (1e-3,)), img)

    def test_unknown_restorer_rejected(self):
        with pytest.raises(ValueError):
            RestorerId("median-denoise", (3.0,))

    def test_deterministic(self, rng):
        img = quant(rng.integers(0, 256, (24, 24)))
        a = restore(RestorerId("gaussian-denoise", (1.8,)), img)
        b = restore(RestorerId("gaussian-denoise", (1.8,)), img)
        assert np.array_equal(a.data, b.data)


class TestFitting:
    def test_prefers_smoothing_on_noise(self):
        samples = [_noisy_sample(s, sigma=40.0) for s in range(3)]
        rid = fit_restorer_per_exposure("gaussian-denoise", samples, 0)
        assert rid.hyperparameters[0] > 0.0

    def test_prefers_identity_on_clean(self):
        samples = []
        for s in range(3):
            base = _noisy_sample(s)
            samples.append(
                CaptureSample(base.scene_id, 0, base.ground_truth, base.ground_truth, base.kernel_hint)
            )
        rid = fit_restorer_per_exposure("gaussian-denoise", samples, 0)
        assert rid.hyperparameters == (0.0,)

    def test_ties_take_first_grid_entry(self):
        samples = [_noisy_sample(0)]
        grid = ((0.8,), (0.8,))
        rid = fit_restorer_per_exposure("gaussian-denoise", samples, 0, grid=grid)
        assert rid.hyperparameters == (0.8,)

    def test_missing_exposure_raises(self):
        with pytest.raises(ValueError):
            fit_restorer_per_exposure("gaussian-denoise", [_noisy_sample(0, exposure_index=1)], 0)


class TestLabels:
    def test_irp_bounds_and_mean(self):
        samples = [_noisy_sample(s) for s in range(2)]
        fitted = {
            (name, 0): RestorerId(name, HYPER_GRIDS[name][0]) for name in RESTORER_NAMES
        }
        records = generate_irp_labels(samples, fitted)
        assert len(records) == 2
        for rec in records:
            assert 0.0 <= rec.final_irp <= 1.0
            expected = np.mean([rec.restorer_irp[n] for n in RESTORER_NAMES])
            assert abs(rec.final_irp - expected) < 1e-12
            for n in RESTORER_NAMES:
                assert 0.0 <= rec.restorer_irp[n] <= 1.0

    def test_csv_round_trip(self, tmp_path):
        samples = [_noisy_sample(s, exposure_index=s % 2) for s in range(4)]
        fitted = {
            (name, i): RestorerId(name, HYPER_GRIDS[name][0])
            for name in RESTORER_NAMES
            for i in (0, 1)
        }
        records = generate_irp_labels(samples, fitted)
        path = tmp_path / "labels.csv"
        write_labels_csv(records, path)
        back = read_labels_csv(path)
        key = lambda r: (r.scene_id, r.exposure_index)
        for a, b in zip(sorted(records, key=key), sorted(back, key=key)):
            assert a.scene_id == b.scene_id
            assert a.exposure_index == b.exposure_index
            assert abs(a.final_irp - b.final_irp) < 1e-9
            for n in RESTORER_NAMES:
                assert abs(a.restorer_psnr[n] - b.restorer_psnr[n]) < 1e-8

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(ValueError):
            read_labels_csv(path)
