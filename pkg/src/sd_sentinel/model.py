"""The dual-path SD detector: model assembly, training, inference, checkpoints.

The image path runs three conv/ReLU/maxpool blocks over the 30x30 window
spectrogram (spatial sizes 30 -> 15 -> 7 -> 3); the vector path runs the same
block pattern in 1-D over the 30-point power vector (30 -> 15 -> 7 -> 3).
Their flattened features are concatenated and treated as a single-channel
sequence for one more conv/ReLU/maxpool fusion block, then a dense layer and
a sigmoid yield the per-window SD probability. Single-path variants reuse
the identical fusion/head on just one branch.

Checkpoints are flat binary files:

    magic ``SDDM`` | u32 version | u32 desc word count | desc (u32 words)
    | u64 param count | params as little-endian float32, in declaration order

The descriptor holds the architecture code, channel widths, input sizes, and
one (kind, dims...) record per parameterized layer, so a checkpoint is
self-describing and loaders can reject any mismatch.
"""

from __future__ import annotations

import struct
import warnings
from pathlib import Path

import numpy as np

from .config import ModelConfig, RunConfig, TrainConfig, fanout_rng
from .errors import CheckpointError, DataError
from .nn import (
    Adam,
    Conv1d,
    Conv2d,
    Dense,
    Flatten,
    Layer,
    MaxPool1d,
    MaxPool2d,
    ReLU,
    Sigmoid,
    bce_loss,
)
from .scoring import OutcomeSeries
from .trace import EegTrace
from .windows import IMAGE_SHAPE, VECTOR_LEN, WindowSample, stack_windows, windows_from_trace

CHECKPOINT_MAGIC = b"SDDM"
CHECKPOINT_VERSION = 1
FUSION_POOL = 4

_ARCH_CODES = {"dual": 0, "image": 1, "vector": 2}
_ARCH_NAMES = {v: k for k, v in _ARCH_CODES.items()}
_LAYER_KIND = {Conv2d: 1, Conv1d: 2, Dense: 3}


def _pooled(length: int, times: int, size: int = 2) -> int:
    for _ in range(times):
        length //= size
    return length


class SdDetector:
    """Window classifier; ``arch`` picks dual, image-only, or vector-only."""

    def __init__(
        self,
        arch: str = "dual",
        conv_channels: tuple[int, ...] = (8, 16, 32),
        fusion_channels: int = 4,
        seed: int = 0,
        dtype=np.float32,
    ) -> None:
        if arch not in _ARCH_CODES:
            raise DataError(f"unknown architecture {arch!r}")
        c1, c2, c3 = conv_channels
        self.arch = arch
        self.conv_channels = (int(c1), int(c2), int(c3))
        self.fusion_channels = int(fusion_channels)
        self.dtype = dtype
        rng = fanout_rng(seed, "init", arch)

        self.image_layers: list[Layer] = []
        self.vector_layers: list[Layer] = []
        if arch in ("dual", "image"):
            self.image_layers = [
                Conv2d(1, c1, rng, dtype=dtype), ReLU(), MaxPool2d(2),
                Conv2d(c1, c2, rng, dtype=dtype), ReLU(), MaxPool2d(2),
                Conv2d(c2, c3, rng, dtype=dtype), ReLU(), MaxPool2d(2),
                Flatten(),
            ]
        if arch in ("dual", "vector"):
            self.vector_layers = [
                Conv1d(1, c1, rng, dtype=dtype), ReLU(), MaxPool1d(2),
                Conv1d(c1, c2, rng, dtype=dtype), ReLU(), MaxPool1d(2),
                Conv1d(c2, c3, rng, dtype=dtype), ReLU(), MaxPool1d(2),
                Flatten(),
            ]

        side = _pooled(IMAGE_SHAPE[0], 3)
        self.image_flat = c3 * side * side if self.image_layers else 0
        self.vector_flat = c3 * _pooled(VECTOR_LEN, 3) if self.vector_layers else 0
        self.concat_len = self.image_flat + self.vector_flat

        self.fusion_layers: list[Layer] = [
            Conv1d(1, fusion_channels, rng, dtype=dtype), ReLU(), MaxPool1d(FUSION_POOL),
            Flatten(),
        ]
        head_in = fusion_channels * (self.concat_len // FUSION_POOL)
        self.head = Dense(head_in, 1, rng, dtype=dtype)
        self.out = Sigmoid()

    # -- plumbing -----------------------------------------------------------

    def _param_layers(self) -> list[Layer]:
        layers = self.image_layers + self.vector_layers + self.fusion_layers + [self.head]
        return [l for l in layers if l.params]

    def parameters(self) -> list[np.ndarray]:
        return [p for l in self._param_layers() for p in l.params]

    def gradients(self) -> list[np.ndarray]:
        return [g for l in self._param_layers() for g in l.grads]

    def zero_grads(self) -> None:
        for l in self._param_layers():
            l.zero_grads()

    def param_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    # -- forward / backward -------------------------------------------------

    def forward(self, images: np.ndarray, vectors: np.ndarray) -> np.ndarray:
        """(B, 30, 30) images + (B, 30) vectors -> (B,) probabilities."""
        feats = []
        if self.image_layers:
            h = np.asarray(images, dtype=self.dtype)[:, None, :, :]
            for layer in self.image_layers:
                h = layer.forward(h)
            feats.append(h)
        if self.vector_layers:
            h = np.asarray(vectors, dtype=self.dtype)[:, None, :]
            for layer in self.vector_layers:
                h = layer.forward(h)
            feats.append(h)
        cat = feats[0] if len(feats) == 1 else np.concatenate(feats, axis=1)
        h = cat[:, None, :]
        for layer in self.fusion_layers:
            h = layer.forward(h)
        z = self.head.forward(h)
        return self.out.forward(z)[:, 0]

    def backward(self, dprobs: np.ndarray) -> None:
        d = self.out.backward(dprobs[:, None])
        d = self.head.backward(d)
        for layer in reversed(self.fusion_layers):
            d = layer.backward(d)
        d = d[:, 0, :]
        if self.image_layers and self.vector_layers:
            d_img, d_vec = d[:, : self.image_flat], d[:, self.image_flat :]
        elif self.image_layers:
            d_img, d_vec = d, None
        else:
            d_img, d_vec = None, d
        if d_img is not None:
            g = d_img
            for layer in reversed(self.image_layers):
                g = layer.backward(g)
        if d_vec is not None:
            g = d_vec
            for layer in reversed(self.vector_layers):
                g = layer.backward(g)

    # -- checkpoint descriptor ------------------------------------------------

    def describe(self) -> list[int]:
        words = [
            _ARCH_CODES[self.arch],
            *self.conv_channels,
            self.fusion_channels,
            IMAGE_SHAPE[0],
            IMAGE_SHAPE[1],
            VECTOR_LEN,
        ]
        for layer in self._param_layers():
            kind = _LAYER_KIND[type(layer)]
            dims = list(layer.params[0].shape)
            words.extend([kind] + dims + [0] * (3 - len(dims)))
        return words


def build_model(config: ModelConfig | None = None, seed: int = 0, dtype=np.float32) -> SdDetector:
    config = config or ModelConfig()
    return SdDetector(
        arch=config.arch,
        conv_channels=tuple(config.conv_channels),
        fusion_channels=config.fusion_channels,
        seed=seed,
        dtype=dtype,
    )


def analytic_param_count(
    arch: str = "dual",
    conv_channels: tuple[int, ...] = (8, 16, 32),
    fusion_channels: int = 4,
) -> int:
    """Closed-form parameter count of the declared architecture."""
    c1, c2, c3 = conv_channels
    total = 0
    image_flat = vector_flat = 0
    if arch in ("dual", "image"):
        total += (c1 * 1 * 9 + c1) + (c2 * c1 * 9 + c2) + (c3 * c2 * 9 + c3)
        side = _pooled(IMAGE_SHAPE[0], 3)
        image_flat = c3 * side * side
    if arch in ("dual", "vector"):
        total += (c1 * 1 * 3 + c1) + (c2 * c1 * 3 + c2) + (c3 * c2 * 3 + c3)
        vector_flat = c3 * _pooled(VECTOR_LEN, 3)
    concat = image_flat + vector_flat
    total += fusion_channels * 1 * 3 + fusion_channels
    total += fusion_channels * (concat // FUSION_POOL) * 1 + 1
    return total


# ---------------------------------------------------------------------------
# training


def train(
    model: SdDetector,
    images: np.ndarray,
    vectors: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig | None = None,
    seed: int = 0,
) -> list[float]:
    """Adam/BCE training; returns the per-epoch mean loss curve.

    Batches are drawn uniformly from a per-epoch shuffle with no class
    reweighting; with a fixed seed the whole run is bit-reproducible.
    """
    config = config or TrainConfig()
    n = int(labels.size)
    if n == 0:
        raise DataError("training dataset is empty")
    if np.unique(labels).size < 2:
        warnings.warn("training dataset contains a single class; model will be degenerate")
    images = np.asarray(images, dtype=model.dtype)
    vectors = np.asarray(vectors, dtype=model.dtype)
    y = np.asarray(labels, dtype=model.dtype)

    adam = Adam(
        model.parameters(),
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
    )
    losses: list[float] = []
    for epoch in range(config.epochs):
        order = fanout_rng(seed, "shuffle", epoch).permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            probs = model.forward(images[idx], vectors[idx])
            loss, dprobs = bce_loss(probs, y[idx], clamp=config.loss_clamp)
            model.zero_grads()
            model.backward(dprobs)
            adam.step(model.gradients())
            total += loss * idx.size
        losses.append(total / n)
    return losses


# ---------------------------------------------------------------------------
# inference


def _apply_ablation(images: np.ndarray, vectors: np.ndarray, ablation: str):
    if ablation == "none":
        return images, vectors
    if ablation == "zero-image":
        return np.zeros_like(images), vectors
    if ablation == "zero-vector":
        return images, np.zeros_like(vectors)
    raise DataError(f"unknown ablation mode {ablation!r}")


def infer(
    model: SdDetector,
    images: np.ndarray,
    vectors: np.ndarray,
    threshold: float = 0.5,
    ablation: str = "none",
) -> tuple[np.ndarray, np.ndarray]:
    """Per-window probabilities and binary outcomes (prob >= threshold).

    Windows are evaluated one at a time, so results are identical whether
    callers pass one window or a batch.
    """
    images, vectors = _apply_ablation(images, vectors, ablation)
    n = images.shape[0]
    probs = np.empty(n, dtype=np.float32)
    for i in range(n):
        probs[i] = model.forward(images[i : i + 1], vectors[i : i + 1])[0]
    outcomes = (probs >= threshold).astype(np.uint8)
    return probs, outcomes


def infer_windows(
    model: SdDetector,
    samples: list[WindowSample],
    threshold: float = 0.5,
    ablation: str = "none",
) -> OutcomeSeries:
    centers, _, images, vectors = stack_windows(samples)
    if centers.size == 0:
        raise DataError("no windows to infer on")
    probs, outcomes = infer(model, images, vectors, threshold, ablation)
    return OutcomeSeries(
        start_min=int(centers[0]), probabilities=probs, outcomes=outcomes, threshold=threshold
    )


def infer_trace(model: SdDetector, trace: EegTrace, config: RunConfig | None = None) -> OutcomeSeries:
    """Full pipeline on one trace: condition, featurize, window, classify."""
    config = config or RunConfig()
    samples = windows_from_trace(trace, None, config)
    return infer_windows(
        model, samples, threshold=config.model.threshold, ablation=config.model.ablation
    )


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: SdDetector, path: str | Path) -> None:
    desc = model.describe()
    params = model.parameters()
    flat = np.concatenate([p.ravel() for p in params]).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(desc)))
        fh.write(np.asarray(desc, dtype="<u4").tobytes())
        fh.write(struct.pack("<Q", flat.size))
        fh.write(flat.tobytes())


def load_checkpoint(path: str | Path) -> SdDetector:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12:
        raise CheckpointError(f"{path.name}: truncated header ({len(blob)} of 12 bytes)")
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(
            f"{path.name}: bad magic {blob[:4]!r}, expected {CHECKPOINT_MAGIC!r}"
        )
    version, n_desc = struct.unpack("<II", blob[4:12])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path.name}: unsupported version {version}")
    offset = 12
    need = offset + 4 * n_desc + 8
    if len(blob) < need:
        raise CheckpointError(f"{path.name}: descriptor truncated at byte {len(blob)} of {need}")
    desc = np.frombuffer(blob, dtype="<u4", count=n_desc, offset=offset).tolist()
    offset += 4 * n_desc
    (n_params,) = struct.unpack("<Q", blob[offset : offset + 8])
    offset += 8

    if len(desc) < 8:
        raise CheckpointError(f"{path.name}: descriptor too short ({len(desc)} words)")
    arch_code, c1, c2, c3, fusion, img_h, img_w, vec_len = desc[:8]
    if arch_code not in _ARCH_NAMES:
        raise CheckpointError(f"{path.name}: unknown architecture code {arch_code}")
    if (img_h, img_w) != IMAGE_SHAPE or vec_len != VECTOR_LEN:
        raise CheckpointError(
            f"{path.name}: input geometry {(img_h, img_w)}/{vec_len} does not match "
            f"{IMAGE_SHAPE}/{VECTOR_LEN}"
        )
    model = SdDetector(
        arch=_ARCH_NAMES[arch_code],
        conv_channels=(c1, c2, c3),
        fusion_channels=fusion,
        seed=0,
        dtype=np.float32,
    )
    if model.describe() != desc:
        raise CheckpointError(f"{path.name}: layer descriptor does not match architecture")
    if model.param_count() != n_params:
        raise CheckpointError(
            f"{path.name}: descriptor implies {model.param_count()} parameters, "
            f"file claims {n_params}"
        )
    expected = offset + 4 * n_params
    if len(blob) != expected:
        raise CheckpointError(
            f"{path.name}: expected {expected} bytes, file ends at byte {len(blob)}"
        )
    flat = np.frombuffer(blob, dtype="<f4", count=n_params, offset=offset)
    pos = 0
    for p in model.parameters():
        p[...] = flat[pos : pos + p.size].reshape(p.shape)
        pos += p.size
    return model
