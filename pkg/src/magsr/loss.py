"""Training objectives: per-pixel heteroskedastic Gaussian NLL and MSE baseline.

The NLL for residual r and variance v is mean over pixels of
r^2 / (2 v) + log(v) / 2; the additive Gaussian constant is omitted. All
reductions are means over every element (batch and pixels), so loss
magnitudes are comparable across batch and patch sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class LossValue:
    """Heteroskedastic NLL split into its residual and log-determinant terms."""

    total: float
    per_pixel_residual_term: float
    per_pixel_logdet_term: float
    pixel_count: int

    def __post_init__(self):
        if self.pixel_count < 1:
            raise ValueError("pixel_count must be positive")
        recomposed = self.per_pixel_residual_term + self.per_pixel_logdet_term
        if abs(self.total - recomposed) > 1e-12:
            raise ValueError("total must equal residual + logdet terms within 1e-12")


def _check_shapes(*arrays: torch.Tensor) -> None:
    shapes = {tuple(a.shape) for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")


def mse_loss(prediction, target) -> float:
    """Mean over all elements of (target - prediction)^2."""
    p = torch.as_tensor(prediction, dtype=torch.float64)
    t = torch.as_tensor(target, dtype=torch.float64)
    _check_shapes(p, t)
    return float(torch.mean((t - p) ** 2))


def nll_terms(mean, variance, target) -> tuple[torch.Tensor, torch.Tensor]:
    """Differentiable residual and log-determinant terms of the NLL.

    Each term is already averaged over every element. Gradients flow to
    mean and variance when they are tensors with requires_grad.
    """
    f = torch.as_tensor(mean)
    v = torch.as_tensor(variance)
    y = torch.as_tensor(target)
    _check_shapes(f, v, y)
    if not bool(torch.all(v > 0)):
        raise ValueError("variance must be strictly positive everywhere")
    residual = torch.mean((y - f) ** 2 / (2.0 * v))
    logdet = torch.mean(0.5 * torch.log(v))
    return residual, logdet


def heteroskedastic_nll(mean, variance, target) -> LossValue:
    """Per-pixel Gaussian negative log-likelihood with input-dependent variance."""
    f = torch.as_tensor(mean, dtype=torch.float64)
    v = torch.as_tensor(variance, dtype=torch.float64)
    y = torch.as_tensor(target, dtype=torch.float64)
    residual, logdet = nll_terms(f, v, y)
    res = float(residual)
    ld = float(logdet)
    return LossValue(
        total=res + ld,
        per_pixel_residual_term=res,
        per_pixel_logdet_term=ld,
        pixel_count=f.numel(),
    )


def optimal_variance_check(mean, target) -> np.ndarray:
    """Elementwise (target - mean)^2: the variance at which the NLL is stationary.

    Test utility only; the per-pixel NLL a + log(v)/2 + r^2/(2v) is minimized
    at v = r^2.
    """
    f = np.asarray(mean, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if f.shape != y.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {y.shape}")
    return (y - f) ** 2
