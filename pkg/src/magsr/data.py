"""Magnetogram ingestion, temporal splitting, patch pairing and synthetic data.

File formats:
  * FITS image HDU with a DATE-OBS header (HMI-style input), and
  * the array-container fallback: <id>.raw holding little-endian float32
    pixels plus a JSON sidecar <id>.json with
    {height, width, unit: "Gauss", timestamp, source}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .degrade import DegradeConfig, degrade
from .fitsio import read_fits
from .provenance import config_hash, stable_seed


class SchemaError(ValueError):
    """Input file parsed but violates the expected schema."""


@dataclass
class Magnetogram:
    """2-D line-of-sight magnetic field map in Gauss with acquisition metadata."""

    pixels: np.ndarray
    timestamp: datetime | None
    source: str
    id: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in ("HMI", "SYNTHETIC"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.source == "HMI" and self.timestamp is None:
            raise SchemaError(f"magnetogram {self.id}: HMI data requires a timestamp")


@dataclass(frozen=True)
class PatchPair:
    """Aligned (LR input, HR target) patch pair manufactured by degradation."""

    lr: np.ndarray
    hr: np.ndarray
    provenance: dict
    degrade_config_hash: str


@dataclass(frozen=True)
class SplitAssignment:
    """Per-(year, month) partition labels; one test and one val month per year."""

    seed: int
    entries: dict  # (year, month) -> "train" | "val" | "test"

    def months(self, part: str) -> list[tuple[int, int]]:
        return sorted(k for k, v in self.entries.items() if v == part)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "entries": {f"{y:04d}-{m:02d}": part for (y, m), part in sorted(self.entries.items())},
        }

    @classmethod
    def from_json(cls, payload: dict) -> "SplitAssignment":
        entries = {}
        for key, part in payload["entries"].items():
            year, month = key.split("-")
            entries[(int(year), int(month))] = part
        return cls(seed=int(payload["seed"]), entries=entries)


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale synthetic magnetogram generator settings."""

    count: int
    hr_size: int
    active_region_count_range: tuple[int, int] = (2, 6)
    field_amplitude: float = 1000.0
    noise_model: str = "none"
    noise_coefficient: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be positive")
        if self.hr_size < 4:
            raise ValueError("hr_size must be at least 4")
        lo, hi = self.active_region_count_range
        if not (0 <= lo <= hi):
            raise ValueError(f"bad active_region_count_range {self.active_region_count_range}")
        if self.field_amplitude <= 0:
            raise ValueError("field_amplitude must be positive")
        if self.noise_model not in ("none", "proportional"):
            raise ValueError(f"unknown noise_model {self.noise_model!r}")
        if self.noise_coefficient < 0:
            raise ValueError("noise_coefficient must be non-negative")


def _parse_timestamp(raw: str | None) -> datetime | None:
    if raw is None:
        return None
    return datetime.fromisoformat(str(raw).replace("Z", "+00:00"))


def _clean_pixels(pixels: np.ndarray) -> tuple[np.ndarray, int]:
    bad = ~np.isfinite(pixels)
    count = int(bad.sum())
    if count:
        pixels = np.where(bad, 0.0, pixels)
    return pixels, count


def container_paths(path) -> tuple[Path, Path]:
    """Resolve (raw, sidecar) paths from either half of an array container."""
    p = Path(path)
    if p.suffix == ".json":
        return p.with_suffix(".raw"), p
    if p.suffix == ".raw":
        return p, p.with_suffix(".json")
    return Path(str(p) + ".raw"), Path(str(p) + ".json")


def write_container(directory, mag_id: str, pixels: np.ndarray, timestamp: datetime | None, source: str) -> Path:
    """Write one magnetogram in the array-container format; returns the sidecar path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(pixels, dtype="<f4")
    raw_path = directory / f"{mag_id}.raw"
    raw_path.write_bytes(arr.tobytes())
    sidecar = {
        "height": int(arr.shape[0]),
        "width": int(arr.shape[1]),
        "unit": "Gauss",
        "timestamp": timestamp.isoformat() if timestamp is not None else None,
        "source": source,
    }
    sidecar_path = directory / f"{mag_id}.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return sidecar_path


def _ingest_container(path) -> Magnetogram:
    raw_path, sidecar_path = container_paths(path)
    if not sidecar_path.exists():
        raise FileNotFoundError(f"missing sidecar {sidecar_path}")
    if not raw_path.exists():
        raise FileNotFoundError(f"missing raw data {raw_path}")
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{sidecar_path}: invalid JSON sidecar: {exc}") from exc
    for key in ("height", "width", "source"):
        if key not in sidecar:
            raise SchemaError(f"{sidecar_path}: sidecar missing {key!r}")
    h, w = int(sidecar["height"]), int(sidecar["width"])
    raw = raw_path.read_bytes()
    if len(raw) != h * w * 4:
        raise SchemaError(f"{raw_path}: expected {h * w * 4} bytes, found {len(raw)}")
    pixels = np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(np.float64)
    pixels, cleaned = _clean_pixels(pixels)
    return Magnetogram(
        pixels=pixels,
        timestamp=_parse_timestamp(sidecar.get("timestamp")),
        source=str(sidecar["source"]),
        id=raw_path.stem,
        meta={"cleaned_count": cleaned, "path": str(raw_path)},
    )


def _ingest_fits(path) -> Magnetogram:
    hdus = read_fits(path)
    image = next((h for h in hdus if h.data is not None and h.data.ndim == 2), None)
    if image is None:
        raise SchemaError(f"{path}: no 2-D image HDU found")
    raw_ts = image.header.get("DATE-OBS") or image.header.get("T_OBS")
    if raw_ts is None:
        raise SchemaError(f"{path}: missing DATE-OBS timestamp header")
    pixels, cleaned = _clean_pixels(image.data.astype(np.float64))
    return Magnetogram(
        pixels=pixels,
        timestamp=_parse_timestamp(raw_ts),
        source="HMI",
        id=Path(path).stem,
        meta={"cleaned_count": cleaned, "path": str(path)},
    )


def ingest(path) -> Magnetogram:
    """Load one magnetogram from FITS or the array-container format.

    Non-finite pixels are zero-filled; the count lands in meta["cleaned_count"].
    """
    p = Path(path)
    if not p.exists() and p.suffix not in (".raw", ".json"):
        # bare container id without extension
        raw, _ = container_paths(p)
        if raw.exists():
            return _ingest_container(p)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {p}")
    if p.suffix in (".fits", ".fts", ".fit"):
        return _ingest_fits(p)
    return _ingest_container(p)


def make_temporal_split(years: dict, seed: int) -> SplitAssignment:
    """Assign one random test month and one distinct val month per year.

    years maps each year to its available months. The per-year draws come
    from independent RNG streams keyed by (seed, year), so the result does
    not depend on dict insertion order.
    """
    entries: dict = {}
    for year in sorted(years):
        months = sorted(set(int(m) for m in years[year]))
        if len(months) < 2:
            raise ValueError(f"year {year} has {len(months)} month(s); need at least 2 for val+test")
        rng = np.random.default_rng(stable_seed("split", seed, year))
        test_month = int(rng.choice(months))
        remaining = [m for m in months if m != test_month]
        val_month = int(rng.choice(remaining))
        for m in months:
            if m == test_month:
                entries[(year, m)] = "test"
            elif m == val_month:
                entries[(year, m)] = "val"
            else:
                entries[(year, m)] = "train"
    return SplitAssignment(seed=int(seed), entries=entries)


def center_crop(image: np.ndarray, patch_size: int) -> np.ndarray:
    """Central patch_size x patch_size window; offset = floor((dim - patch)/2)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"expected 2-D image, got shape {img.shape}")
    h, w = img.shape
    if patch_size > h or patch_size > w:
        raise ValueError(f"patch size {patch_size} exceeds image shape {img.shape}")
    r0 = (h - patch_size) // 2
    c0 = (w - patch_size) // 2
    return img[r0 : r0 + patch_size, c0 : c0 + patch_size]


def degrade_config_fingerprint(config: DegradeConfig) -> str:
    return config_hash(
        {
            "scale_factor": config.scale_factor,
            "kernel_size": config.kernel.size,
            "kernel_sigma": config.kernel.sigma,
            "boundary_mode": config.boundary_mode,
        }
    )


def make_pairs(magnetograms, patch_size: int, degrade_config: DegradeConfig) -> list[PatchPair]:
    """Center-crop each magnetogram and pair it with its degraded LR version."""
    if patch_size % degrade_config.scale_factor:
        raise ValueError(
            f"patch_size {patch_size} not divisible by scale_factor {degrade_config.scale_factor}"
        )
    fingerprint = degrade_config_fingerprint(degrade_config)
    pairs = []
    for mag in magnetograms:
        hr = center_crop(mag.pixels, patch_size).astype(np.float64)
        h, w = mag.pixels.shape
        pair = PatchPair(
            lr=degrade(hr, degrade_config),
            hr=hr,
            provenance={
                "magnetogram_id": mag.id,
                "row_offset": (h - patch_size) // 2,
                "col_offset": (w - patch_size) // 2,
            },
            degrade_config_hash=fingerprint,
        )
        pairs.append(pair)
    return pairs


def _gaussian_blob(size: int, cy: float, cx: float, sigma: float, amplitude: float) -> np.ndarray:
    yy = np.arange(size, dtype=np.float64)[:, None]
    xx = np.arange(size, dtype=np.float64)[None, :]
    return amplitude * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma * sigma))


def generate_synthetic(spec: SyntheticSpec) -> list[Magnetogram]:
    """Signed-Gaussian-blob magnetograms with optional proportional noise.

    Proportional noise draws per-pixel sigma = coefficient * |clean| + 1 Gauss;
    the clean field is kept in meta["clean"]. One image per month starting
    2010-01 so the temporal split protocol works on synthetic data.
    """
    images = []
    for k in range(spec.count):
        rng = np.random.default_rng(stable_seed("synth", spec.seed, k))
        lo, hi = spec.active_region_count_range
        n_blobs = int(rng.integers(lo, hi + 1))
        clean = np.zeros((spec.hr_size, spec.hr_size), dtype=np.float64)
        for _ in range(n_blobs):
            cy, cx = rng.uniform(0, spec.hr_size, size=2)
            sigma = rng.uniform(spec.hr_size / 16.0, spec.hr_size / 6.0)
            amplitude = rng.uniform(0.2, 1.0) * spec.field_amplitude * rng.choice([-1.0, 1.0])
            clean += _gaussian_blob(spec.hr_size, cy, cx, sigma, amplitude)
        meta: dict = {"n_blobs": n_blobs}
        if spec.noise_model == "proportional":
            std = spec.noise_coefficient * np.abs(clean) + 1.0
            pixels = clean + rng.normal(size=clean.shape) * std
            meta["clean"] = clean
        else:
            pixels = clean
        images.append(
            Magnetogram(
                pixels=pixels,
                timestamp=datetime(2010 + k // 12, k % 12 + 1, 15),
                source="SYNTHETIC",
                id=f"synthetic-{spec.seed}-{k:05d}",
                meta=meta,
            )
        )
    return images


def write_dataset(directory, magnetograms) -> list[str]:
    """Write magnetograms (and synthetic clean fields) as array containers."""
    ids = []
    for mag in magnetograms:
        write_container(directory, mag.id, mag.pixels, mag.timestamp, mag.source)
        if "clean" in mag.meta:
            write_container(directory, mag.id + ".clean", mag.meta["clean"], mag.timestamp, mag.source)
        ids.append(mag.id)
    return ids


def load_dataset(directory, ids=None) -> list[Magnetogram]:
    """Load array-container magnetograms; clean fields rejoin their images."""
    directory = Path(directory)
    if ids is None:
        ids = sorted(
            p.stem for p in directory.glob("*.raw") if not p.stem.endswith(".clean")
        )
    mags = []
    for mag_id in ids:
        mag = _ingest_container(directory / f"{mag_id}.json")
        clean_raw, clean_sidecar = container_paths(directory / f"{mag_id}.clean")
        if clean_sidecar.exists():
            mag.meta["clean"] = _ingest_container(clean_sidecar).pixels
        mags.append(mag)
    return mags
