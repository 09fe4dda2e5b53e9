"""Three-branch restoration-potential predictor.

One branch reads global luminance statistics (a 256-bin histogram), a
shallow dilated-conv branch reads noise texture from the illumination-
normalized image, and a deeper strided-conv branch reads scene/blur
structure from an edge-preserving smoothed copy. Branch features are
combined by channel-wise softmax attention, repeated three times, then
pooled and regressed to a scalar score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imaging import QuantizedImage
from .nn import Adam, Conv1d, Conv2d, Dense, ParamModule, Tensor, concat, l1_loss
from .nn import softmax_over_branches as _softmax_branches
from .nn.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "PredictorConfig",
    "IrpPredictor",
    "guided_filter",
    "luminance_histogram",
    "linear_rescale",
    "preprocess",
    "predict_irp",
    "export_features",
    "train",
    "TrainResult",
    "save_model",
    "load_model",
]

BRANCHES = ("illumination", "noise", "blur")
HIST_BINS = 256


@dataclass(frozen=True)
class PredictorConfig:
    channels: int = 32
    squeeze_ratio: int = 8
    fusion_repeats: int = 3
    use_illumination: bool = True
    use_noise: bool = True
    use_blur: bool = True
    fusion_mode: str = "selective"  # or "plain-sum"
    crop: int = 64
    gamma: float = 1.0 / 2.2
    m_max: int = 255
    guided_radius: int = 4
    guided_eps: float = 1e-2

    def __post_init__(self):
        if self.channels % self.squeeze_ratio:
            raise ValueError("channels must be divisible by squeeze_ratio")
        if self.fusion_repeats < 1:
            raise ValueError("fusion_repeats must be >= 1")
        if self.fusion_mode not in ("selective", "plain-sum"):
            raise ValueError(f"unknown fusion mode {self.fusion_mode!r}")
        if not (self.use_illumination or self.use_noise or self.use_blur):
            raise ValueError("at least one branch must be enabled")
        if self.crop % 16 or self.crop < 64:
            raise ValueError("crop must be a multiple of 16, at least 64")

    @property
    def enabled_branches(self) -> tuple[str, ...]:
        return tuple(
            b
            for b, on in zip(
                BRANCHES, (self.use_illumination, self.use_noise, self.use_blur)
            )
            if on
        )


# -- fixed preprocessing (outside the differentiated graph) ------------


def luminance_histogram(img: QuantizedImage) -> np.ndarray:
    """Normalized 256-bin luminance histogram; bins sum to 1."""
    x = img.data.astype(np.float64)
    lum = 0.299 * x[..., 0] + 0.587 * x[..., 1] + 0.114 * x[..., 2]
    idx = np.clip(np.round(lum * (HIST_BINS - 1) / img.m_max).astype(int), 0, HIST_BINS - 1)
    hist = np.bincount(idx.ravel(), minlength=HIST_BINS).astype(np.float64)
    return hist / idx.size


def linear_rescale(img: QuantizedImage, gamma: float = 1.0 / 2.2) -> np.ndarray:
    """Undoes gamma and normalizes mean brightness to 1 (HWC float array).

    A small floor on the divisor keeps all-dark images finite; those come
    out with mean < 1 instead of being amplified into noise.
    """
    lin = np.power(img.data.astype(np.float64) / img.m_max, 1.0 / gamma)
    return lin / max(float(lin.mean()), 1e-3)


def _box_sum(x: np.ndarray, radius: int) -> np.ndarray:
    h, w = x.shape[:2]
    c = np.cumsum(x, axis=0)
    c = np.pad(c, [(1, 0)] + [(0, 0)] * (x.ndim - 1))
    rows = c[np.minimum(np.arange(h) + radius + 1, h)] - c[np.maximum(np.arange(h) - radius, 0)]
    c = np.cumsum(rows, axis=1)
    c = np.pad(c, [(0, 0), (1, 0)] + [(0, 0)] * (x.ndim - 2))
    return c[:, np.minimum(np.arange(w) + radius + 1, w)] - c[:, np.maximum(np.arange(w) - radius, 0)]


def _box_mean(x: np.ndarray, radius: int) -> np.ndarray:
    counts = _box_sum(np.ones(x.shape[:2]), radius)
    if x.ndim == 3:
        counts = counts[..., None]
    return _box_sum(x, radius) / counts


def guided_filter(p: np.ndarray, guide: np.ndarray, radius: int = 4, eps: float = 1e-2) -> np.ndarray:
    """Edge-preserving local-linear filter (per channel when 3D)."""
    if p.shape != guide.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {guide.shape}")
    if radius < 1 or eps <= 0:
        raise ValueError("radius must be >= 1 and eps > 0")
    mean_i = _box_mean(guide, radius)
    mean_p = _box_mean(p, radius)
    cov_ip = _box_mean(guide * p, radius) - mean_i * mean_p
    var_i = _box_mean(guide * guide, radius) - mean_i * mean_i
    a = cov_ip / (var_i + eps)
    b = mean_p - a * mean_i
    return _box_mean(a, radius) * guide + _box_mean(b, radius)


def preprocess(img: QuantizedImage, cfg: PredictorConfig) -> dict[str, np.ndarray]:
    """Branch inputs for one image: histogram, rescaled, guided-smoothed."""
    rescaled = linear_rescale(img, cfg.gamma)
    out = {"histogram": luminance_histogram(img)}
    out["rescaled"] = np.transpose(rescaled, (2, 0, 1))  # CHW
    smoothed = guided_filter(rescaled, rescaled, cfg.guided_radius, cfg.guided_eps)
    out["guided"] = np.transpose(smoothed, (2, 0, 1))
    return out


# -- model -------------------------------------------------------------


class _AsppBlock(ParamModule):
    """Parallel dilated 3x3 convs concatenated and projected back to C."""

    def __init__(self, channels: int, rng: np.random.Generator):
        self.branches = [
            Conv2d(channels, channels, 3, rng, padding=d, dilation=d) for d in (1, 2, 4)
        ]
        self.project = Conv2d(3 * channels, channels, 1, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.project(concat([b(x) for b in self.branches])).relu()


class _FusionBlock(ParamModule):
    """Squeeze the pooled summary, expand per branch, softmax-select."""

    def __init__(self, channels: int, squeeze_ratio: int, n_branches: int, rng):
        self.squeeze = Dense(channels, channels // squeeze_ratio, rng)
        self.expands = [Dense(channels // squeeze_ratio, channels, rng) for _ in range(n_branches)]

    def __call__(self, features: list[Tensor]) -> tuple[Tensor, list[Tensor]]:
        total = features[0]
        for f in features[1:]:
            total = total + f
        s = total.global_avg_pool()
        z = self.squeeze(s).relu()
        logits = [exp(z) for exp in self.expands]
        weights = _softmax_branches(logits)
        n, c = weights[0].shape
        fused = None
        for w, f in zip(weights, features):
            term = w.reshape(n, c, 1, 1) * f
            fused = term if fused is None else fused + term
        return fused, weights


class IrpPredictor(ParamModule):
    def __init__(self, cfg: PredictorConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        c = cfg.channels
        n_branches = len(cfg.enabled_branches)

        if cfg.use_illumination:
            self.hist_conv = Conv1d(1, c, 7, rng, padding=3)
            self.hist_dense = Dense(c * HIST_BINS, c, rng)
        if cfg.use_noise:
            self.noise_stem = Conv2d(3, c, 3, rng, stride=2, padding=1)
            self.noise_blocks = [_AsppBlock(c, rng) for _ in range(3)]
        if cfg.use_blur:
            widths = (16, 32, 64, 64)
            self.blur_stages = []
            prev = 3
            for w in widths:
                self.blur_stages.append(Conv2d(prev, w, 3, rng, stride=2, padding=1))
                prev = w
            self.blur_depthwise = Conv2d(prev, prev, 3, rng, padding=1, groups=prev)
            self.blur_pointwise = Conv2d(prev, c, 1, rng)

        if cfg.fusion_mode == "selective":
            self.fusions = [
                _FusionBlock(c, cfg.squeeze_ratio, n_branches, rng)
                for _ in range(cfg.fusion_repeats)
            ]
        if cfg.fusion_repeats > 1:
            self.reprojections = [
                [Conv2d(c, c, 3, rng, padding=1) for _ in range(n_branches)]
                for _ in range(cfg.fusion_repeats - 1)
            ]

        self.head1 = Dense(c, c, rng)
        self.head2 = Dense(c, c // 2, rng)
        self.head3 = Dense(c // 2, 1, rng)

    # nested list of modules is not handled by the generic traversal
    def named_parameters(self):
        params = super().named_parameters()
        if self.cfg.fusion_repeats > 1:
            for r, projs in enumerate(self.reprojections):
                for b, mod in enumerate(projs):
                    params.extend(
                        (f"reprojections.{r}.{b}.{n}", p) for n, p in mod.named_parameters()
                    )
        return params

    # -- branches ------------------------------------------------------

    def _illumination_branch(self, hist: Tensor, hw: tuple[int, int]) -> Tensor:
        n = hist.shape[0]
        c = self.cfg.channels
        x = self.hist_conv(hist.reshape(n, 1, HIST_BINS)).relu()
        vec = self.hist_dense(x.reshape(n, c * HIST_BINS))
        return vec.reshape(n, c, 1, 1).broadcast_to((n, c, hw[0], hw[1]))

    def _noise_branch(self, x: Tensor) -> Tensor:
        y = self.noise_stem(x).relu().avg_pool2d(2)
        for block in self.noise_blocks:
            y = block(y)
        return y

    def _blur_branch(self, x: Tensor) -> Tensor:
        y = x
        for stage in self.blur_stages:
            y = stage(y).relu()
        y = self.blur_pointwise(self.blur_depthwise(y)).relu()
        return y.upsample_nearest(4)

    def forward(self, batch: dict[str, np.ndarray], return_features: bool = False):
        """Runs the full model on a preprocessed batch.

        ``batch`` holds stacked arrays: histogram (N, 256), rescaled and
        guided (N, 3, H, W). Returns the (N, 1) score tensor, or the
        pre-pooling fused feature map when ``return_features`` is set.
        """
        cfg = self.cfg
        h, w = batch["rescaled"].shape[2:]
        hw = (h // 4, w // 4)
        features = []
        if cfg.use_illumination:
            features.append(self._illumination_branch(Tensor(batch["histogram"]), hw))
        if cfg.use_noise:
            features.append(self._noise_branch(Tensor(batch["rescaled"])))
        if cfg.use_blur:
            features.append(self._blur_branch(Tensor(batch["guided"])))

        fused = None
        self.last_fusion_weights = []
        for r in range(cfg.fusion_repeats):
            if cfg.fusion_mode == "selective" and len(features) > 1:
                fused, weights = self.fusions[r](features)
                self.last_fusion_weights.append([t.data for t in weights])
            elif cfg.fusion_mode == "selective":
                fused = features[0]
            else:
                fused = features[0]
                for f in features[1:]:
                    fused = fused + f
                fused = fused / len(features)
            if r + 1 < cfg.fusion_repeats:
                features = [proj(fused).relu() for proj in self.reprojections[r]]
        if return_features:
            return fused
        pooled = fused.global_avg_pool()
        y = self.head1(pooled).relu()
        y = self.head2(y).relu()
        return self.head3(y)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        if set(params) != set(state):
            missing = set(params) ^ set(state)
            raise ValueError(f"checkpoint/model parameter mismatch: {sorted(missing)}")
        for name, p in params.items():
            if p.data.shape != state[name].shape:
                raise ValueError(f"shape mismatch for {name}")
            p.data = state[name].astype(np.float64).copy()


# -- inference ---------------------------------------------------------


def _center_crop_multiple(img: QuantizedImage, multiple: int = 16, minimum: int = 64) -> QuantizedImage:
    h, w = img.height, img.width
    if h < minimum or w < minimum:
        raise ValueError(f"image {h}x{w} smaller than the {minimum}px minimum")
    ch = (h // multiple) * multiple
    cw = (w // multiple) * multiple
    if (ch, cw) == (h, w):
        return img
    y0 = (h - ch) // 2
    x0 = (w - cw) // 2
    return QuantizedImage(img.data[y0 : y0 + ch, x0 : x0 + cw].copy(), m_max=img.m_max)


def _batch_of_one(img: QuantizedImage, cfg: PredictorConfig) -> dict[str, np.ndarray]:
    prep = preprocess(_center_crop_multiple(img), cfg)
    return {
        "histogram": prep["histogram"][None],
        "rescaled": prep["rescaled"][None],
        "guided": prep["guided"][None],
    }


def predict_irp(img: QuantizedImage, model: IrpPredictor) -> float:
    """Scalar restoration-potential score for one image."""
    return float(model.forward(_batch_of_one(img, model.cfg)).data[0, 0])


def export_features(img: QuantizedImage, model: IrpPredictor) -> np.ndarray:
    """Final fused pre-pooling feature map, as (H', W', C)."""
    feats = model.forward(_batch_of_one(img, model.cfg), return_features=True)
    return np.transpose(feats.data[0], (1, 2, 0)).copy()


# -- persistence -------------------------------------------------------

_CONFIG_KEYS = (
    "channels",
    "squeeze_ratio",
    "fusion_repeats",
    "use_illumination",
    "use_noise",
    "use_blur",
    "crop",
    "gamma",
    "m_max",
    "guided_radius",
    "guided_eps",
)


def save_model(model: IrpPredictor, path) -> None:
    state = model.state_dict()
    for key in _CONFIG_KEYS:
        state[f"__config__.{key}"] = np.asarray(float(getattr(model.cfg, key)))
    state["__config__.fusion_selective"] = np.asarray(
        1.0 if model.cfg.fusion_mode == "selective" else 0.0
    )
    save_checkpoint(state, path)


def load_model(path) -> IrpPredictor:
    state = load_checkpoint(path)
    cfg_vals = {k: state.pop(f"__config__.{k}") for k in _CONFIG_KEYS}
    selective = state.pop("__config__.fusion_selective")
    cfg = PredictorConfig(
        channels=int(cfg_vals["channels"]),
        squeeze_ratio=int(cfg_vals["squeeze_ratio"]),
        fusion_repeats=int(cfg_vals["fusion_repeats"]),
        use_illumination=bool(cfg_vals["use_illumination"]),
        use_noise=bool(cfg_vals["use_noise"]),
        use_blur=bool(cfg_vals["use_blur"]),
        fusion_mode="selective" if selective else "plain-sum",
        crop=int(cfg_vals["crop"]),
        gamma=float(cfg_vals["gamma"]),
        m_max=int(cfg_vals["m_max"]),
        guided_radius=int(cfg_vals["guided_radius"]),
        guided_eps=float(cfg_vals["guided_eps"]),
    )
    model = IrpPredictor(cfg, seed=0)
    model.load_state_dict(state)
    return model


# -- training ----------------------------------------------------------


@dataclass
class TrainResult:
    model: IrpPredictor
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1


def _stack_batch(preps: list[dict[str, np.ndarray]]) -> dict[str, np.ndarray]:
    return {
        "histogram": np.stack([p["histogram"] for p in preps]),
        "rescaled": np.stack([p["rescaled"] for p in preps]),
        "guided": np.stack([p["guided"] for p in preps]),
    }


def _crop(img: QuantizedImage, size: int, rng: np.random.Generator) -> QuantizedImage:
    if img.height == size and img.width == size:
        return img
    if img.height < size or img.width < size:
        raise ValueError(f"image {img.height}x{img.width} smaller than crop {size}")
    y0 = int(rng.integers(0, img.height - size + 1))
    x0 = int(rng.integers(0, img.width - size + 1))
    return QuantizedImage(img.data[y0 : y0 + size, x0 : x0 + size].copy(), m_max=img.m_max)


def train(
    train_set: list[tuple[QuantizedImage, float]],
    val_set: list[tuple[QuantizedImage, float]],
    cfg: PredictorConfig,
    lr: float = 1e-3,
    epochs: int = 20,
    batch: int = 8,
    seed: int = 0,
) -> TrainResult:
    """Adam / L1 training on random crops; keeps the best-validation state."""
    if not train_set:
        raise ValueError("empty training set")
    model = IrpPredictor(cfg, seed=seed)
    opt = Adam(model.parameters(), lr=lr)
    rng = np.random.default_rng(seed + 1)

    fixed_size = all(im.height == cfg.crop and im.width == cfg.crop for im, _ in train_set)
    cache = [preprocess(im, cfg) for im, _ in train_set] if fixed_size else None
    val_batches = [
        (_batch_of_one(im, cfg), label) for im, label in val_set
    ]

    result = TrainResult(model=model)
    best_val = np.inf
    best_state = model.state_dict()
    for epoch in range(epochs):
        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        for start in range(0, len(order), batch):
            idx = order[start : start + batch]
            if cache is not None:
                preps = [cache[i] for i in idx]
            else:
                preps = [preprocess(_crop(train_set[i][0], cfg.crop, rng), cfg) for i in idx]
            labels = np.array([[train_set[i][1]] for i in idx])
            opt.zero_grad()
            pred = model.forward(_stack_batch(preps))
            loss = l1_loss(pred, Tensor(labels))
            loss.backward()
            opt.step()
            epoch_loss += float(loss.data) * len(idx)
        result.train_losses.append(epoch_loss / len(train_set))

        if val_batches:
            val_loss = float(
                np.mean(
                    [abs(float(model.forward(b).data[0, 0]) - label) for b, label in val_batches]
                )
            )
        else:
            val_loss = result.train_losses[-1]
        result.val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_state = model.state_dict()
            result.best_epoch = epoch
    model.load_state_dict(best_state)
    return result
