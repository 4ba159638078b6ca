"""MC-dropout sampling and the epistemic/aleatoric decomposition.

Predictive uncertainty per pixel splits into the population variance of the
sampled mean fields (epistemic) plus the average of the predicted noise
variances (aleatoric). The epistemic term equals mean(f^2) - mean(f)^2 but
is computed by a two-pass (or streaming Welford) algorithm: at +-1500 Gauss
the naive difference of squares loses ~6 digits in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SRModel, forward, predicted_variance
from .provenance import stable_seed

# epistemic values above -1e-9 clamp to zero; anything lower is a real bug
EPISTEMIC_NEGATIVE_TOLERANCE = -1e-9


@dataclass
class SampleSet:
    """T stochastic forward passes: mean fields and predicted variances."""

    means: np.ndarray  # (T, H, W) Gauss
    variances: np.ndarray  # (T, H, W) Gauss^2
    seeds: list

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        if self.means.ndim != 3 or self.means.shape != self.variances.shape:
            raise ValueError("means and variances must both be (T, H, W) with equal shapes")
        if self.means.shape[0] < 1:
            raise ValueError("need at least one sample")
        if not np.all(self.variances > 0):
            raise ValueError("variances must be strictly positive")

    @property
    def T(self) -> int:
        return self.means.shape[0]


@dataclass
class UncertaintyMaps:
    """Per-pixel predictive mean and the uncertainty decomposition."""

    predictive_mean: np.ndarray
    epistemic: np.ndarray
    aleatoric: np.ndarray
    total: np.ndarray
    T: int

    def __post_init__(self):
        if np.any(self.epistemic < 0):
            raise ValueError("epistemic map must be non-negative after clamping")
        if not np.all(self.aleatoric > 0):
            raise ValueError("aleatoric map must be strictly positive")
        if np.max(np.abs(self.total - (self.epistemic + self.aleatoric))) > 1e-12 * max(
            1.0, float(np.max(np.abs(self.total)))
        ):
            raise ValueError("total must equal epistemic + aleatoric")


def derive_sample_seed(base_seed: int, t: int) -> int:
    """Splittable per-sample seed; independent of sampling order."""
    return stable_seed("mc-sample", base_seed, t)


def sample(model: SRModel, lr_patch: np.ndarray, T: int, base_seed: int = 0) -> SampleSet:
    """Run T stochastic forwards with per-sample derived seeds."""
    if model.config.heads != "mean_and_logvar":
        raise RuntimeError("MC sampling requires a mean_and_logvar model")
    if T < 1:
        raise ValueError("T must be >= 1")
    means = np.empty((T,) + _output_shape(model, lr_patch), dtype=np.float64)
    variances = np.empty_like(means)
    seeds = [derive_sample_seed(base_seed, t) for t in range(T)]
    for t, seed in enumerate(seeds):
        out = forward(model, lr_patch, stochastic=True, seed=seed)
        means[t] = out.mean
        variances[t] = predicted_variance(out, model.config)
    return SampleSet(means=means, variances=variances, seeds=seeds)


def _output_shape(model: SRModel, lr_patch: np.ndarray) -> tuple[int, int]:
    h, w = np.asarray(lr_patch).shape
    r = model.config.scale_factor
    return (h * r, w * r)


def _clamp_epistemic(epistemic: np.ndarray) -> np.ndarray:
    low = float(epistemic.min())
    if low < EPISTEMIC_NEGATIVE_TOLERANCE:
        raise ValueError(f"epistemic variance {low} below tolerance {EPISTEMIC_NEGATIVE_TOLERANCE}")
    return np.maximum(epistemic, 0.0)


def decompose(samples: SampleSet) -> UncertaintyMaps:
    """Two-pass decomposition of a materialized SampleSet."""
    means = samples.means
    variances = samples.variances
    predictive_mean = means.mean(axis=0)
    centered = means - predictive_mean[None, :, :]
    epistemic = _clamp_epistemic(np.mean(centered**2, axis=0))
    aleatoric = variances.mean(axis=0)
    return UncertaintyMaps(
        predictive_mean=predictive_mean,
        epistemic=epistemic,
        aleatoric=aleatoric,
        total=epistemic + aleatoric,
        T=samples.T,
    )


def streaming_decompose(sample_source) -> UncertaintyMaps:
    """Welford aggregation over an iterator of (mean, variance) grids.

    Memory use is independent of the number of samples; agrees with
    decompose within 1e-9 relative.
    """
    count = 0
    running_mean = None
    m2 = None
    variance_sum = None
    for mean, variance in sample_source:
        mean = np.asarray(mean, dtype=np.float64)
        variance = np.asarray(variance, dtype=np.float64)
        if not np.all(variance > 0):
            raise ValueError("variances must be strictly positive")
        count += 1
        if running_mean is None:
            running_mean = mean.copy()
            m2 = np.zeros_like(mean)
            variance_sum = variance.copy()
            continue
        delta = mean - running_mean
        running_mean += delta / count
        m2 += delta * (mean - running_mean)
        variance_sum += variance
    if count == 0:
        raise ValueError("sample source is empty")
    epistemic = _clamp_epistemic(m2 / count)
    aleatoric = variance_sum / count
    return UncertaintyMaps(
        predictive_mean=running_mean,
        epistemic=epistemic,
        aleatoric=aleatoric,
        total=epistemic + aleatoric,
        T=count,
    )


def sample_stream(model: SRModel, lr_patch: np.ndarray, T: int, base_seed: int = 0):
    """Generator of (mean, variance) pairs matching sample()'s seed stream."""
    if model.config.heads != "mean_and_logvar":
        raise RuntimeError("MC sampling requires a mean_and_logvar model")
    for t in range(T):
        out = forward(model, lr_patch, stochastic=True, seed=derive_sample_seed(base_seed, t))
        yield out.mean, predicted_variance(out, model.config)


MAP_EXTENSIONS = ("MEAN", "EPISTEMIC", "ALEATORIC", "TOTAL")

_MAP_FIELDS = {
    "MEAN": "predictive_mean",
    "EPISTEMIC": "epistemic",
    "ALEATORIC": "aleatoric",
    "TOTAL": "total",
}


def save_maps_fits(path, maps: UncertaintyMaps, header: dict | None = None) -> None:
    """Multi-extension FITS with MEAN/EPISTEMIC/ALEATORIC/TOTAL image HDUs."""
    from .fitsio import write_fits

    base = dict(header or {})
    base["NSAMPLES"] = maps.T
    hdus = [(None, base, "")]
    for name in MAP_EXTENSIONS:
        hdus.append((getattr(maps, _MAP_FIELDS[name]).astype(np.float32), {}, name))
    write_fits(path, hdus)


def load_maps_fits(path) -> UncertaintyMaps:
    from .fitsio import read_fits

    by_name = {h.name: h for h in read_fits(path)}
    missing = [n for n in MAP_EXTENSIONS if n not in by_name]
    if missing:
        raise ValueError(f"{path}: missing map extensions {missing}")
    return _rebuild_maps(
        {n: by_name[n].data.astype(np.float64) for n in MAP_EXTENSIONS},
        T=int(by_name[""].header.get("NSAMPLES", 0)),
        origin=str(path),
    )


def _rebuild_maps(arrays: dict, T: int, origin: str) -> UncertaintyMaps:
    # stored maps are float32, so re-derive the exact total and only verify
    # the stored one against it
    epistemic = arrays["EPISTEMIC"]
    aleatoric = arrays["ALEATORIC"]
    total = epistemic + aleatoric
    stored = arrays["TOTAL"]
    scale = max(1.0, float(np.max(np.abs(total))))
    if np.max(np.abs(stored - total)) > 1e-5 * scale:
        raise ValueError(f"{origin}: TOTAL map inconsistent with EPISTEMIC + ALEATORIC")
    return UncertaintyMaps(
        predictive_mean=arrays["MEAN"],
        epistemic=epistemic,
        aleatoric=aleatoric,
        total=total,
        T=T,
    )


def save_maps_containers(directory, maps: UncertaintyMaps, manifest: dict) -> None:
    """Four <name>.raw float32 files plus maps.json carrying the manifest."""
    import json
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = dict(manifest)
    payload["T"] = maps.T
    payload["height"], payload["width"] = (int(s) for s in maps.predictive_mean.shape)
    for name in MAP_EXTENSIONS:
        arr = np.ascontiguousarray(getattr(maps, _MAP_FIELDS[name]), dtype="<f4")
        (directory / f"{name.lower()}.raw").write_bytes(arr.tobytes())
    (directory / "maps.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_maps_containers(directory) -> tuple[UncertaintyMaps, dict]:
    import json
    from pathlib import Path

    directory = Path(directory)
    manifest = json.loads((directory / "maps.json").read_text())
    h, w = int(manifest["height"]), int(manifest["width"])
    arrays = {}
    for name in MAP_EXTENSIONS:
        raw = (directory / f"{name.lower()}.raw").read_bytes()
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(np.float64)
    maps = _rebuild_maps(arrays, T=int(manifest["T"]), origin=str(directory))
    return maps, manifest
