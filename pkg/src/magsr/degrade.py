"""HR -> LR degradation pipeline: Gaussian smoothing followed by block averaging.

All operations are pure functions on 2-D float arrays (Gauss units) and are
linear in the image argument.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class GaussianKernel:
    """Normalized isotropic Gaussian smoothing kernel.

    weights is a size x size grid summing to 1, symmetric under horizontal,
    vertical and diagonal reflection.
    """

    size: int
    sigma: float
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.size, self.size):
            raise ValueError(f"weights shape {w.shape} != ({self.size}, {self.size})")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("kernel weights must sum to 1 within 1e-12")
        if np.any(w < 0):
            raise ValueError("kernel weights must be non-negative")


def make_gaussian_kernel(size: int, sigma: float) -> GaussianKernel:
    """Build a normalized isotropic Gaussian kernel.

    size must be odd and >= 1; sigma > 0. Weights are
    w(i, j) proportional to exp(-(i^2 + j^2) / (2 sigma^2)) with (i, j)
    offsets from the kernel center, normalized to unit sum.
    """
    if not isinstance(size, (int, np.integer)) or size < 1:
        raise ValueError(f"kernel size must be a positive integer, got {size!r}")
    if size % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {size}")
    if not sigma > 0:
        raise ValueError(f"kernel sigma must be positive, got {sigma!r}")
    half = size // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    g1 = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    w = np.outer(g1, g1)
    w /= w.sum()
    return GaussianKernel(size=int(size), sigma=float(sigma), weights=w)


@dataclass(frozen=True)
class DegradeConfig:
    """Configuration of the HR -> LR degradation operator."""

    scale_factor: int
    kernel: GaussianKernel
    boundary_mode: str = "reflect"

    def __post_init__(self):
        if not isinstance(self.scale_factor, (int, np.integer)) or self.scale_factor < 2:
            raise ValueError(f"scale_factor must be an integer >= 2, got {self.scale_factor!r}")
        if self.boundary_mode != "reflect":
            raise ValueError(f"unsupported boundary_mode {self.boundary_mode!r}")
        if self.kernel.size < self.scale_factor:
            warnings.warn(
                f"kernel size {self.kernel.size} < scale_factor {self.scale_factor}; "
                "anti-aliasing may be insufficient",
                stacklevel=2,
            )


def default_degrade_config(scale_factor: int = 2) -> DegradeConfig:
    """Default anti-aliasing kernel: sigma = scale/2, size = 2*ceil(2*sigma)+1."""
    sigma = scale_factor / 2.0
    size = 2 * math.ceil(2.0 * sigma) + 1
    return DegradeConfig(scale_factor=int(scale_factor), kernel=make_gaussian_kernel(size, sigma))


def smooth(image: np.ndarray, kernel: GaussianKernel, boundary_mode: str = "reflect") -> np.ndarray:
    """2-D correlation of image with kernel weights under reflect padding.

    Output has the same shape as the input. Correlation and convolution
    coincide here because the kernel is reflection-symmetric.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"image must be a non-empty 2-D grid, got shape {np.shape(image)}")
    if boundary_mode != "reflect":
        raise ValueError(f"unsupported boundary_mode {boundary_mode!r}")
    half = kernel.size // 2
    if half == 0:
        return img.copy()
    if half >= img.shape[0] or half >= img.shape[1]:
        raise ValueError(
            f"kernel half-width {half} requires image larger than {half}x{half}, "
            f"got {img.shape}"
        )
    padded = np.pad(img, half, mode="reflect")
    windows = sliding_window_view(padded, (kernel.size, kernel.size))
    return np.einsum("ijkl,kl->ij", windows, kernel.weights)


def block_average(image: np.ndarray, factor: int) -> np.ndarray:
    """Average non-overlapping factor x factor blocks.

    Both image dimensions must be divisible by factor; no implicit cropping.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"image must be a non-empty 2-D grid, got shape {np.shape(image)}")
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    h, w = img.shape
    if h % factor or w % factor:
        raise ValueError(f"image shape {img.shape} not divisible by factor {factor}")
    # Gather each block contiguously so the reduction order matches a plain
    # row-major accumulation over the block.
    blocks = (
        img.reshape(h // factor, factor, w // factor, factor)
        .transpose(0, 2, 1, 3)
        .reshape(h // factor, w // factor, factor * factor)
    )
    return np.add.reduce(blocks, axis=-1) / (factor * factor)


def degrade(image: np.ndarray, config: DegradeConfig) -> np.ndarray:
    """Manufacture an LR image: smooth with the Gaussian kernel, then block-average."""
    smoothed = smooth(image, config.kernel, config.boundary_mode)
    return block_average(smoothed, config.scale_factor)
