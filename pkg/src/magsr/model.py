"""Dropout-instrumented convolutional encoder-decoder with mean/log-variance heads.

The network consumes an LR grid and emits an HR mean field (Gauss) and,
with heads="mean_and_logvar", a per-pixel log-variance (log Gauss^2). The
per-pixel predicted variance is exp(log_variance) + variance_floor.

Inputs are scaled by config.data_scale inside the model; all public inputs
and outputs are in raw Gauss units. Dropout masks are drawn from an explicit
torch.Generator so stochastic passes are reproducible per seed, and the
deterministic pass (inverted-dropout convention) equals the mask expectation.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
import torch
from torch import nn

from .provenance import FORMAT_VERSION

SNAPSHOT_MAGIC = b"MAGSRWS\x00"

HEADS = ("mean_only", "mean_and_logvar")


@dataclass(frozen=True)
class ModelConfig:
    scale_factor: int = 2
    base_channels: int = 32
    depth: int = 3
    dropout_p: float = 0.0
    variance_floor: float = 0.0
    heads: str = "mean_only"
    data_scale: float = 1000.0

    def __post_init__(self):
        if self.scale_factor < 2:
            raise ValueError("scale_factor must be >= 2")
        if self.base_channels < 1 or self.depth < 1:
            raise ValueError("base_channels and depth must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")
        if self.heads not in HEADS:
            raise ValueError(f"heads must be one of {HEADS}")
        if self.variance_floor < 0:
            raise ValueError("variance_floor must be non-negative")
        if self.heads == "mean_and_logvar" and self.variance_floor <= 0:
            raise ValueError("variance_floor must be > 0 for mean_and_logvar heads")
        if self.data_scale <= 0:
            raise ValueError("data_scale must be positive")


@dataclass
class ModelOutput:
    """One forward pass: predicted mean field and optional log-variance."""

    mean: np.ndarray
    log_variance: np.ndarray | None = None

    def __post_init__(self):
        if self.log_variance is not None and self.log_variance.shape != self.mean.shape:
            raise ValueError("mean and log_variance must share one shape")


def predicted_variance(output: ModelOutput, config: ModelConfig) -> np.ndarray:
    """exp(log_variance) + variance_floor, elementwise (Gauss^2)."""
    if config.heads != "mean_and_logvar" or output.log_variance is None:
        raise RuntimeError("predicted_variance requires a mean_and_logvar model output")
    return np.exp(np.asarray(output.log_variance, dtype=np.float64)) + config.variance_floor


def _dropout(x: torch.Tensor, p: float, generator: torch.Generator | None) -> torch.Tensor:
    if p <= 0.0 or generator is None:
        return x
    keep = 1.0 - p
    mask = torch.bernoulli(torch.full_like(x, keep), generator=generator)
    return x * mask / keep


class _ConvBlock(nn.Module):
    """3x3 conv -> ReLU -> dropout; dropout only fires when a generator is given."""

    def __init__(self, in_ch: int, out_ch: int, p: float, stride: int = 1):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1)
        self.p = p

    def forward(self, x, generator=None):
        return _dropout(torch.relu(self.conv(x)), self.p, generator)


class _ResBlock(nn.Module):
    def __init__(self, ch: int, p: float):
        super().__init__()
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
        self.p = p

    def forward(self, x, generator=None):
        h = _dropout(torch.relu(self.conv1(x)), self.p, generator)
        h = _dropout(self.conv2(h), self.p, generator)
        return torch.relu(x + h)


class SRModel(nn.Module):
    """Strided encoder, residual bottleneck, upsampling decoder, sub-pixel head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c = config.base_channels
        p = config.dropout_p
        channels = [min(c * 2**i, 4 * c) for i in range(config.depth + 1)]

        self.stem = _ConvBlock(1, channels[0], p)
        self.encoder = nn.ModuleList(
            _ConvBlock(channels[i], channels[i + 1], p, stride=2) for i in range(config.depth)
        )
        self.bottleneck = nn.ModuleList([_ResBlock(channels[-1], p), _ResBlock(channels[-1], p)])
        self.decoder = nn.ModuleList(
            _ConvBlock(channels[i + 1], channels[i], p) for i in reversed(range(config.depth))
        )
        r = config.scale_factor
        self.upscale = nn.Conv2d(channels[0], channels[0] * r * r, 3, padding=1)
        self.shuffle = nn.PixelShuffle(r)
        self.head_mean = nn.Conv2d(channels[0], 1, 3, padding=1)
        if config.heads == "mean_and_logvar":
            self.head_logvar = nn.Conv2d(channels[0], 1, 3, padding=1)
            # start the predicted extra variance at the floor instead of
            # exp(0) * data_scale^2, which is off by orders of magnitude
            nn.init.zeros_(self.head_logvar.weight)
            nn.init.constant_(
                self.head_logvar.bias,
                math.log(config.variance_floor / config.data_scale**2),
            )

    def forward(self, x: torch.Tensor, generator: torch.Generator | None = None):
        """x: (B, 1, h, w) in normalized units; returns normalized (mean, logvar|None)."""
        h, w = x.shape[-2:]
        divisor = 2**self.config.depth
        if h % divisor or w % divisor:
            raise ValueError(f"input {h}x{w} not divisible by 2^depth = {divisor}")

        feats = self.stem(x, generator)
        skips = []
        for enc in self.encoder:
            skips.append(feats)
            feats = enc(feats, generator)
        for block in self.bottleneck:
            feats = block(feats, generator)
        for dec, skip in zip(self.decoder, reversed(skips)):
            feats = nn.functional.interpolate(feats, scale_factor=2, mode="nearest")
            feats = dec(feats, generator) + skip
        feats = _dropout(torch.relu(self.shuffle(self.upscale(feats))), self.config.dropout_p, generator)

        upsampled = nn.functional.interpolate(
            x, scale_factor=self.config.scale_factor, mode="bilinear", align_corners=False
        )
        mean = self.head_mean(feats) + upsampled
        if self.config.heads == "mean_and_logvar":
            return mean, self.head_logvar(feats)
        return mean, None


def build_model(config: ModelConfig, seed: int) -> SRModel:
    """Construct an SRModel with parameter initialization fixed by seed."""
    torch.manual_seed(seed)
    model = SRModel(config)
    model.eval()
    return model


def forward(model: SRModel, lr_patch: np.ndarray, stochastic: bool = False, seed: int = 0) -> ModelOutput:
    """Single-grid forward pass in Gauss units.

    stochastic=True samples Bernoulli(1-p) dropout masks from a generator
    seeded with seed; stochastic=False disables dropout, which under the
    inverted-dropout convention equals the expectation over masks.
    """
    cfg = model.config
    patch = np.asarray(lr_patch, dtype=np.float64)
    if patch.ndim != 2:
        raise ValueError(f"lr_patch must be 2-D, got shape {patch.shape}")
    x = torch.from_numpy(patch / cfg.data_scale).float().unsqueeze(0).unsqueeze(0)
    generator = None
    if stochastic and cfg.dropout_p > 0.0:
        generator = torch.Generator().manual_seed(int(seed) & 0x7FFFFFFFFFFFFFFF)
    with torch.no_grad():
        mean_n, logvar_n = model(x, generator)
    mean = mean_n[0, 0].double().numpy() * cfg.data_scale
    if logvar_n is None:
        return ModelOutput(mean=mean)
    log_variance = logvar_n[0, 0].double().numpy() + 2.0 * math.log(cfg.data_scale)
    return ModelOutput(mean=mean, log_variance=log_variance)


def parameter_count(model: SRModel) -> int:
    return sum(p.numel() for p in model.parameters())


def save_snapshot(model: SRModel, path, training_metadata: dict | None = None) -> dict:
    """Write parameters as raw little-endian tensors behind a JSON header.

    Returns the header dict. The layout round-trips bit-exactly and avoids
    pickle so snapshot equality is plain byte equality.
    """
    state = model.state_dict()
    manifest = []
    blob = io.BytesIO()
    for name, tensor in state.items():
        data = tensor.detach().cpu().contiguous().numpy()
        raw = np.ascontiguousarray(data, dtype=data.dtype.newbyteorder("<")).tobytes()
        manifest.append(
            {
                "name": name,
                "shape": list(data.shape),
                "dtype": str(data.dtype),
                "offset": blob.tell(),
                "nbytes": len(raw),
            }
        )
        blob.write(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "training_metadata": training_metadata or {},
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        fh.write(blob.getvalue())
    return header


def _read_snapshot(path) -> tuple[dict, int]:
    """Returns (header, byte offset where tensor data begins)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise OSError(f"{path}: not a model snapshot")
        header_len = int.from_bytes(fh.read(8), "little")
        raw = fh.read(header_len)
        if len(raw) != header_len:
            raise OSError(f"{path}: truncated snapshot header")
        try:
            header = json.loads(raw.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise OSError(f"{path}: corrupt snapshot header: {exc}") from exc
    return header, len(SNAPSHOT_MAGIC) + 8 + header_len


def read_snapshot_header(path) -> dict:
    return _read_snapshot(path)[0]


class SnapshotSchemaError(ValueError):
    """Snapshot parsed but has an unsupported version or config schema."""


def load_snapshot(path) -> SRModel:
    """Rebuild the model from a snapshot; deterministic forwards are bit-identical."""
    header, data_start = _read_snapshot(path)
    if header.get("format_version") != FORMAT_VERSION:
        raise SnapshotSchemaError(
            f"{path}: format_version {header.get('format_version')!r} != {FORMAT_VERSION!r}"
        )
    try:
        config = ModelConfig(**header["config"])
    except (TypeError, KeyError) as exc:
        raise SnapshotSchemaError(f"{path}: bad config in snapshot: {exc}") from exc
    model = build_model(config, seed=0)
    state = {}
    with open(path, "rb") as fh:
        payload = fh.read()
    for entry in header["tensors"]:
        start = data_start + entry["offset"]
        raw = payload[start : start + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise OSError(f"{path}: truncated tensor data for {entry['name']}")
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]).newbyteorder("<"))
        state[entry["name"]] = torch.from_numpy(arr.reshape(entry["shape"]).copy())
    model.load_state_dict(state)
    model.training_metadata = header.get("training_metadata", {})
    return model


def with_variant(config: ModelConfig, heads: str, dropout: bool, variance_floor: float | None = None) -> ModelConfig:
    """Derive a variant config: toggle heads/dropout, optionally set the floor."""
    kwargs = {"heads": heads, "dropout_p": config.dropout_p if dropout else 0.0}
    if variance_floor is not None:
        kwargs["variance_floor"] = variance_floor
    return replace(config, **kwargs)
