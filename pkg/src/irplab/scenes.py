"""Procedural scene generation, exposure ladders, and dataset manifests.

A scene is a ground-truth radiance frame plus a smooth flow field; a
dataset is a set of scenes, each captured across an exposure ladder, with
a JSON manifest recording paths, seeds, checksums and the train/val/test
split.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats
from .imaging import (
    ExposureConfig,
    FlowField,
    LinearImage,
    QuantizedImage,
    RadianceFrame,
    develop_to_srgb,
    simulate_capture,
)

__all__ = [
    "SceneSpec",
    "DatasetManifest",
    "default_exposure_ladder",
    "generate_procedural_scene",
    "generate_scene_captures",
    "build_manifest",
    "generate_dataset",
    "load_manifest",
]

MANIFEST_VERSION = "irplab-dataset-1"
DEFAULT_LADDER_LEN = 11
DEFAULT_FLOW_CAP = 6.0


def default_exposure_ladder(
    n: int = DEFAULT_LADDER_LEN,
    t_min: float = 1.0 / 32.0,
    t_max: float = 4.0,
    **cfg_kwargs,
) -> list[ExposureConfig]:
    """Geometric exposure ladder from noise-dominated to blur-dominated.

    Gain is set so that delta_t * gain = 1 at the geometric midpoint,
    keeping mid-ladder captures near nominal brightness.
    """
    ts = np.geomspace(t_min, t_max, n)
    gain = 1.0 / np.sqrt(t_min * t_max)
    return [ExposureConfig(delta_t=float(t), gain=float(gain), **cfg_kwargs) for t in ts]


@dataclass(frozen=True)
class SceneSpec:
    scene_id: str
    ground_truth: RadianceFrame
    flow: FlowField
    exposure_ladder: tuple[ExposureConfig, ...]
    base_seed: int

    def __post_init__(self):
        object.__setattr__(self, "exposure_ladder", tuple(self.exposure_ladder))
        dts = [c.delta_t for c in self.exposure_ladder]
        if any(b <= a for a, b in zip(dts, dts[1:])):
            raise ValueError("exposure ladder must be strictly increasing in delta_t")


def _smooth_field(rng: np.random.Generator, h: int, w: int, coarse: int = 4) -> np.ndarray:
    """Low-frequency scalar field via bilinear upsampling of a coarse grid."""
    grid = rng.normal(size=(coarse, coarse))
    ys = np.linspace(0, coarse - 1, h)
    xs = np.linspace(0, coarse - 1, w)
    y0 = np.clip(np.floor(ys).astype(int), 0, coarse - 2)
    x0 = np.clip(np.floor(xs).astype(int), 0, coarse - 2)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    g = grid
    return (
        g[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
        + g[np.ix_(y0, x0 + 1)] * (1 - fy) * fx
        + g[np.ix_(y0 + 1, x0)] * fy * (1 - fx)
        + g[np.ix_(y0 + 1, x0 + 1)] * fy * fx
    )


def generate_procedural_scene(
    seed: int,
    width: int,
    height: int,
    flow_cap: float = DEFAULT_FLOW_CAP,
) -> tuple[RadianceFrame, FlowField]:
    """Textured synthetic frame plus a smooth bounded flow field.

    The frame mixes oriented sinusoidal gradients, random smooth blobs and
    a step edge; the flow is a low-frequency vector field plus a global
    translation, rescaled so its maximum magnitude never exceeds
    ``flow_cap``.
    """
    if width < 16 or height < 16:
        raise ValueError("scene dimensions must be >= 16")
    rng = np.random.default_rng(seed)
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")

    img = np.zeros((height, width, 3))
    for c in range(3):
        acc = np.zeros((height, width))
        for _ in range(3):
            theta = rng.uniform(0, np.pi)
            freq = rng.uniform(0.02, 0.25)
            phase = rng.uniform(0, 2 * np.pi)
            acc += rng.uniform(0.3, 1.0) * np.sin(
                2 * np.pi * freq * (np.cos(theta) * xs + np.sin(theta) * ys) + phase
            )
        for _ in range(4):
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            sig = rng.uniform(0.05, 0.25) * min(height, width)
            acc += rng.uniform(-1.0, 1.5) * np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2 * sig**2))
        # one hard step edge per channel for blur sensitivity
        if rng.random() < 0.5:
            acc += rng.uniform(0.5, 1.0) * (xs > rng.uniform(0.3, 0.7) * width)
        else:
            acc += rng.uniform(0.5, 1.0) * (ys > rng.uniform(0.3, 0.7) * height)
        img[..., c] = acc
    lo, hi = img.min(), img.max()
    img = (img - lo) / max(hi - lo, 1e-12)
    img = 0.05 + 0.9 * img  # keep headroom so noise does not clip at 0/1

    u = _smooth_field(rng, height, width) + rng.normal(scale=0.5)
    v = _smooth_field(rng, height, width) + rng.normal(scale=0.5)
    mag = np.hypot(u, v).max()
    target = rng.uniform(0.4, 1.0) * flow_cap
    if mag > 1e-12:
        scale = target / mag
        u, v = u * scale, v * scale
    return RadianceFrame(img), FlowField(u, v)


def capture_seed(base_seed: int, exposure_index: int) -> int:
    return base_seed ^ exposure_index


def generate_scene_captures(spec: SceneSpec) -> list[QuantizedImage]:
    """One capture per ladder entry, seeded as base_seed XOR exposure index."""
    return [
        simulate_capture(spec.ground_truth, spec.flow, cfg, capture_seed(spec.base_seed, i))
        for i, cfg in enumerate(spec.exposure_ladder)
    ]


@dataclass
class DatasetManifest:
    version: str
    split_seed: int
    scenes: list[dict] = field(default_factory=list)

    def scene_ids(self, split: str | None = None) -> list[str]:
        return [s["scene_id"] for s in self.scenes if split is None or s["split"] == split]

    def scene(self, scene_id: str) -> dict:
        for s in self.scenes:
            if s["scene_id"] == scene_id:
                return s
        raise KeyError(scene_id)


def assign_splits(scene_ids: list[str], split_seed: int) -> dict[str, str]:
    """Deterministic 70/10/20 split by scene.

    Validation gets floor(10%), test floor(20%), the remainder trains.
    """
    ids = list(scene_ids)
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate scene ids")
    if len(ids) < 10:
        raise ValueError("need at least 10 scenes for a 70/10/20 split")
    order = np.random.default_rng(split_seed).permutation(len(ids))
    n = len(ids)
    n_val = n // 10
    n_test = n * 2 // 10
    splits = {}
    for pos, idx in enumerate(order):
        if pos < n_val:
            splits[ids[idx]] = "val"
        elif pos < n_val + n_test:
            splits[ids[idx]] = "test"
        else:
            splits[ids[idx]] = "train"
    return splits


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def build_manifest(scenes: list[dict], split_seed: int) -> DatasetManifest:
    """Assembles a manifest from per-scene file records and assigns splits.

    Each record needs scene_id, ground_truth/flow paths and a captures
    list of {exposure_index, delta_t, seed, path, checksum} dicts.
    """
    splits = assign_splits([s["scene_id"] for s in scenes], split_seed)
    manifest = DatasetManifest(version=MANIFEST_VERSION, split_seed=split_seed)
    for s in sorted(scenes, key=lambda s: s["scene_id"]):
        rec = dict(s)
        rec["split"] = splits[s["scene_id"]]
        manifest.scenes.append(rec)
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    payload = {
        "version": manifest.version,
        "split_seed": manifest.split_seed,
        "scenes": manifest.scenes,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version: {payload.get('version')!r}")
    return DatasetManifest(
        version=payload["version"],
        split_seed=payload["split_seed"],
        scenes=payload["scenes"],
    )


def generate_dataset(
    out_dir: str | Path,
    n_scenes: int,
    width: int,
    height: int,
    seed: int,
    ladder: list[ExposureConfig] | None = None,
    flow_cap: float = DEFAULT_FLOW_CAP,
) -> DatasetManifest:
    """Generates scenes and captures on disk and writes manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if ladder is None:
        ladder = default_exposure_ladder()
    records = []
    for i in range(n_scenes):
        scene_id = f"scene{i:04d}"
        scene_seed = seed * 100003 + i
        frame, flow = generate_procedural_scene(scene_seed, width, height, flow_cap=flow_cap)
        spec = SceneSpec(scene_id, frame, flow, tuple(ladder), base_seed=scene_seed)
        scene_dir = out / scene_id
        scene_dir.mkdir(exist_ok=True)

        # reference for restoration metrics: noiseless, static development
        gt_path = scene_dir / "ground_truth.png"
        gt_q = develop_to_srgb(LinearImage(frame.data), ladder[0])
        formats.write_capture(gt_path, gt_q)
        gt_raw = scene_dir / "ground_truth.npy"
        np.save(gt_raw, frame.data)
        flow_path = scene_dir / "flow.flo"
        formats.write_flow(flow_path, flow)

        captures = []
        for j, (cfg, img) in enumerate(zip(spec.exposure_ladder, generate_scene_captures(spec))):
            cap_path = scene_dir / f"capture{j:02d}.png"
            formats.write_capture(cap_path, img)
            captures.append(
                {
                    "exposure_index": j,
                    "delta_t": cfg.delta_t,
                    "gain": cfg.gain,
                    "seed": capture_seed(scene_seed, j),
                    "path": str(cap_path.relative_to(out)),
                    "checksum": _sha256(cap_path),
                }
            )
        records.append(
            {
                "scene_id": scene_id,
                "base_seed": scene_seed,
                "ground_truth": str(gt_path.relative_to(out)),
                "ground_truth_linear": str(gt_raw.relative_to(out)),
                "ground_truth_checksum": _sha256(gt_path),
                "flow": str(flow_path.relative_to(out)),
                "flow_checksum": _sha256(flow_path),
                "captures": captures,
            }
        )
    manifest = build_manifest(records, split_seed=seed)
    save_manifest(manifest, out / "manifest.json")
    return manifest
