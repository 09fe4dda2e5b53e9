"""Classical restoration oracles and restoration-potential labels.

Four deterministic restorers (two denoisers, two deconvolvers) are fitted
per exposure setting by grid search on the training split. A capture's
label is the mean, over the four fitted restorers, of its restored
fidelity (normalized PSNR averaged with SSIM against the ground truth).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter

from . import formats
from .imaging import ExposureConfig, FlowField, QuantizedImage
from .metrics import PSNR_RANGE, SSIM_RANGE, normalize_metric, psnr, srcc, ssim
from .scenes import DatasetManifest

__all__ = [
    "RESTORER_NAMES",
    "RestorerId",
    "IrpRecord",
    "motion_psf",
    "restore",
    "fit_restorer_per_exposure",
    "generate_irp_labels",
    "label_dataset",
    "cross_restorer_consistency",
    "write_labels_csv",
    "read_labels_csv",
]

RESTORER_NAMES = ("gaussian-denoise", "bilateral-denoise", "wiener-deconv", "richardson-lucy")

# Fixed, versioned hyperparameter grids. Ties in the fit go to the first
# entry, so ordering is part of the contract.
HYPER_GRIDS: dict[str, tuple[tuple[float, ...], ...]] = {
    # (sigma,)
    "gaussian-denoise": tuple((s,) for s in (0.0, 0.5, 0.8, 1.2, 1.8, 2.5)),
    # (sigma_color, sigma_space) on [0,1]-scaled values
    "bilateral-denoise": tuple(
        (sc, ss) for sc in (0.05, 0.1, 0.2, 0.4) for ss in (2.0, 4.0)
    ),
    # (noise_power,)
    "wiener-deconv": tuple((k,) for k in (1e-4, 1e-3, 5e-3, 2e-2, 1e-1)),
    # (iterations,)
    "richardson-lucy": tuple((float(it),) for it in (0, 4, 8, 16, 30)),
}


@dataclass(frozen=True)
class RestorerId:
    name: str
    hyperparameters: tuple[float, ...]

    def __post_init__(self):
        if self.name not in RESTORER_NAMES:
            raise ValueError(f"unknown restorer {self.name!r}")
        object.__setattr__(self, "hyperparameters", tuple(float(h) for h in self.hyperparameters))


def default_restorers() -> list[RestorerId]:
    return [RestorerId(name, HYPER_GRIDS[name][0]) for name in RESTORER_NAMES]


def motion_psf(flow: FlowField, cfg: ExposureConfig) -> np.ndarray:
    """Box PSF along the mean flow direction, scaled by exposure time.

    Taps are splatted bilinearly at the same fractional displacements the
    motion integrator samples, so on uniform flow this is the exact blur
    kernel. Returned as a small odd-sized array summing to 1.
    """
    mu = float(np.mean(flow.u)) * cfg.delta_t
    mv = float(np.mean(flow.v)) * cfg.delta_t
    length = int(round(float(np.hypot(mu, mv))))
    n_taps = length + 1
    r = length + 1
    size = 2 * r + 1
    psf = np.zeros((size, size))
    for k in range(n_taps):
        t = k / max(n_taps - 1, 1)
        dx, dy = t * mu, t * mv
        x0, y0 = int(np.floor(dx)), int(np.floor(dy))
        fx, fy = dx - x0, dy - y0
        for oy, wy in ((0, 1 - fy), (1, fy)):
            for ox, wx in ((0, 1 - fx), (1, fx)):
                if wx * wy > 0:
                    psf[r + y0 + oy, r + x0 + ox] += wx * wy / n_taps
    return psf


def _psf_to_otf(psf: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Embeds a centered PSF into an image-sized array and takes its FFT."""
    h, w = shape
    r = psf.shape[0] // 2
    big = np.zeros((h, w))
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            val = psf[r + dy, r + dx]
            if val != 0.0:
                big[dy % h, dx % w] += val
    return np.fft.fft2(big)


def _wiener(channel: np.ndarray, otf: np.ndarray, noise_power: float) -> np.ndarray:
    spectrum = np.fft.fft2(channel)
    filt = np.conj(otf) / (np.abs(otf) ** 2 + noise_power)
    return np.real(np.fft.ifft2(filt * spectrum))


def _richardson_lucy(channel: np.ndarray, otf: np.ndarray, iterations: int) -> np.ndarray:
    if iterations == 0:
        return channel
    eps = 1e-12
    observed = np.clip(channel, eps, None)
    estimate = observed.copy()
    otf_conj = np.conj(otf)
    for _ in range(iterations):
        blurred = np.real(np.fft.ifft2(otf * np.fft.fft2(estimate)))
        ratio = observed / np.clip(blurred, eps, None)
        estimate = estimate * np.real(np.fft.ifft2(otf_conj * np.fft.fft2(ratio)))
    return estimate


def restore(
    rid: RestorerId,
    img: QuantizedImage,
    kernel_hint: np.ndarray | None = None,
) -> QuantizedImage:
    """Runs one restorer; deconvolvers require a PSF via ``kernel_hint``."""
    x = img.data.astype(np.float64) / img.m_max
    if rid.name == "gaussian-denoise":
        (sigma,) = rid.hyperparameters
        out = x if sigma == 0 else gaussian_filter(x, sigma=(sigma, sigma, 0), mode="nearest")
    elif rid.name == "bilateral-denoise":
        sigma_color, sigma_space = rid.hyperparameters
        out = cv2.bilateralFilter(
            x.astype(np.float32), d=-1, sigmaColor=sigma_color, sigmaSpace=sigma_space
        ).astype(np.float64)
    elif rid.name in ("wiener-deconv", "richardson-lucy"):
        if kernel_hint is None:
            raise ValueError(f"{rid.name} requires a kernel_hint PSF")
        otf = _psf_to_otf(kernel_hint, x.shape[:2])
        out = np.empty_like(x)
        for c in range(x.shape[2]):
            if rid.name == "wiener-deconv":
                out[..., c] = _wiener(x[..., c], otf, rid.hyperparameters[0])
            else:
                out[..., c] = _richardson_lucy(x[..., c], otf, int(rid.hyperparameters[0]))
    else:  # pragma: no cover - guarded by RestorerId
        raise ValueError(rid.name)
    q = np.clip(np.floor(out * img.m_max + 0.5), 0, img.m_max)
    dtype = np.uint8 if img.m_max <= 255 else np.uint16
    return QuantizedImage(q.astype(dtype), m_max=img.m_max)


@dataclass(frozen=True)
class CaptureSample:
    """One degraded capture with its restoration reference and PSF hint."""

    scene_id: str
    exposure_index: int
    capture: QuantizedImage
    ground_truth: QuantizedImage
    kernel_hint: np.ndarray


def fit_restorer_per_exposure(
    name: str,
    train_samples: list[CaptureSample],
    exposure_index: int,
    grid: tuple[tuple[float, ...], ...] | None = None,
) -> RestorerId:
    """Grid search maximizing mean restored PSNR at one exposure setting."""
    samples = [s for s in train_samples if s.exposure_index == exposure_index]
    if not samples:
        raise ValueError(f"no training samples at exposure index {exposure_index}")
    if grid is None:
        grid = HYPER_GRIDS[name]
    best, best_score = None, -np.inf
    for hyper in grid:
        rid = RestorerId(name, hyper)
        score = float(
            np.mean([psnr(restore(rid, s.capture, s.kernel_hint), s.ground_truth) for s in samples])
        )
        if score > best_score:
            best, best_score = rid, score
    return best


@dataclass(frozen=True)
class IrpRecord:
    scene_id: str
    exposure_index: int
    restorer_psnr: dict[str, float]
    restorer_ssim: dict[str, float]
    restorer_irp: dict[str, float]
    final_irp: float


def _capture_irp(sample: CaptureSample, restorers: list[RestorerId]) -> IrpRecord:
    psnrs, ssims, irps = {}, {}, {}
    for rid in restorers:
        restored = restore(rid, sample.capture, sample.kernel_hint)
        p = psnr(restored, sample.ground_truth)
        s = ssim(restored, sample.ground_truth)
        psnrs[rid.name] = p
        ssims[rid.name] = s
        irps[rid.name] = 0.5 * (
            normalize_metric(p, PSNR_RANGE) + normalize_metric(s, SSIM_RANGE)
        )
    final = float(np.mean([irps[r.name] for r in restorers]))
    return IrpRecord(sample.scene_id, sample.exposure_index, psnrs, ssims, irps, final)


def load_samples(
    manifest: DatasetManifest,
    root: str | Path,
    splits: tuple[str, ...] = ("train", "val", "test"),
) -> list[CaptureSample]:
    """Loads captures (plus references and PSF hints) for the given splits."""
    root = Path(root)
    samples = []
    for scene in manifest.scenes:
        if scene["split"] not in splits:
            continue
        gt_path = root / scene["ground_truth"]
        if not gt_path.exists():
            raise FileNotFoundError(f"missing ground truth: {gt_path}")
        gt = formats.read_capture(gt_path)
        flow = formats.read_flow(root / scene["flow"])
        for cap in scene["captures"]:
            cap_path = root / cap["path"]
            if not cap_path.exists():
                raise FileNotFoundError(f"missing capture: {cap_path}")
            cfg = ExposureConfig(delta_t=cap["delta_t"], gain=cap.get("gain", 1.0))
            samples.append(
                CaptureSample(
                    scene_id=scene["scene_id"],
                    exposure_index=cap["exposure_index"],
                    capture=formats.read_capture(cap_path),
                    ground_truth=gt,
                    kernel_hint=motion_psf(flow, cfg),
                )
            )
    return samples


def generate_irp_labels(
    samples: list[CaptureSample],
    fitted: dict[tuple[str, int], RestorerId],
) -> list[IrpRecord]:
    """Labels every sample with the per-exposure fitted restorers."""
    records = []
    for sample in samples:
        restorers = [fitted[(name, sample.exposure_index)] for name in RESTORER_NAMES]
        records.append(_capture_irp(sample, restorers))
    return records


def label_dataset(
    manifest: DatasetManifest,
    root: str | Path,
    splits: tuple[str, ...] = ("train", "val", "test"),
) -> tuple[list[IrpRecord], dict[tuple[str, int], RestorerId]]:
    """Fits restorers on the train split and labels the requested splits."""
    train = load_samples(manifest, root, splits=("train",))
    exposure_indices = sorted({s.exposure_index for s in train})
    fitted = {}
    for name in RESTORER_NAMES:
        for idx in exposure_indices:
            fitted[(name, idx)] = fit_restorer_per_exposure(name, train, idx)
    targets = train if splits == ("train",) else load_samples(manifest, root, splits=splits)
    return generate_irp_labels(targets, fitted), fitted


def cross_restorer_consistency(records: list[IrpRecord]) -> np.ndarray:
    """Pairwise SRCC matrix between the per-restorer label series."""
    if len(records) < 20:
        raise ValueError("need at least 20 records for a stable consistency estimate")
    series = {
        name: np.array([r.restorer_irp[name] for r in records]) for name in RESTORER_NAMES
    }
    n = len(RESTORER_NAMES)
    mat = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            mat[i, j] = mat[j, i] = srcc(series[RESTORER_NAMES[i]], series[RESTORER_NAMES[j]])
    return mat


LABEL_FIELDS = (
    ["scene_id", "exposure_index"]
    + [f"{n}_{m}" for n in RESTORER_NAMES for m in ("psnr", "ssim", "irp")]
    + ["final_irp"]
)


def write_labels_csv(records: list[IrpRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LABEL_FIELDS)
        for r in sorted(records, key=lambda r: (r.scene_id, r.exposure_index)):
            row = [r.scene_id, str(r.exposure_index)]
            for name in RESTORER_NAMES:
                row += [
                    f"{r.restorer_psnr[name]:.10g}",
                    f"{r.restorer_ssim[name]:.10g}",
                    f"{r.restorer_irp[name]:.10g}",
                ]
            row.append(f"{r.final_irp:.10g}")
            writer.writerow(row)


def read_labels_csv(path: str | Path) -> list[IrpRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(LABEL_FIELDS):
            raise ValueError(f"unexpected label CSV header in {path}")
        for row in reader:
            records.append(
                IrpRecord(
                    scene_id=row["scene_id"],
                    exposure_index=int(row["exposure_index"]),
                    restorer_psnr={n: float(row[f"{n}_psnr"]) for n in RESTORER_NAMES},
                    restorer_ssim={n: float(row[f"{n}_ssim"]) for n in RESTORER_NAMES},
                    restorer_irp={n: float(row[f"{n}_irp"]) for n in RESTORER_NAMES},
                    final_irp=float(row["final_irp"]),
                )
            )
    return records
