"""Seeded training loops for the four model variants.

Variants mirror the evaluation table: baseline (MSE, no dropout), epistemic
(MSE + dropout), aleatoric (heteroskedastic NLL, no dropout) and both
(NLL + dropout). The NLL variants run a two-stage procedure: a mean-only
homoskedastic stage whose training MSE becomes the variance floor of the
heteroskedastic stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .loss import nll_terms
from .model import ModelConfig, SRModel, build_model, with_variant
from .provenance import stable_seed

VARIANTS = ("baseline", "epistemic", "aleatoric", "both")

# Keeps exp() finite while the variance head settles; far outside the range
# reached at convergence (normalized units).
LOGVAR_CLAMP = 14.0


@dataclass(frozen=True)
class TrainingBudget:
    epochs: int = 150
    batch_size: int = 32
    learning_rate: float = 2e-3
    weight_decay: float = 0.0
    clip_grad_norm: float = 5.0
    lr_decay: bool = False  # cosine anneal to learning_rate / 10

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class TrainingResult:
    model: SRModel
    config: ModelConfig
    variant: str
    seed: int
    history: list = field(default_factory=list)  # per-epoch {"epoch", "loss", "stage"}
    variance_floor: float | None = None
    stage1_history: list = field(default_factory=list)
    stage1_model: SRModel | None = None

    @property
    def final_loss(self) -> float:
        return self.history[-1]["loss"]

    @property
    def initial_loss(self) -> float:
        return self.history[0]["loss"]


def _pairs_to_tensors(pairs, data_scale: float) -> tuple[torch.Tensor, torch.Tensor]:
    lr = np.stack([p.lr for p in pairs]).astype(np.float32) / data_scale
    hr = np.stack([p.hr for p in pairs]).astype(np.float32) / data_scale
    return torch.from_numpy(lr).unsqueeze(1), torch.from_numpy(hr).unsqueeze(1)


def _train_loop(
    config: ModelConfig,
    pairs,
    budget: TrainingBudget,
    seed: int,
    objective: str,
    stage: str,
    warm_start: SRModel | None = None,
) -> tuple[SRModel, list]:
    if not pairs:
        raise ValueError("cannot train on an empty pair list")
    model = build_model(config, seed=stable_seed("init", seed, stage))
    if warm_start is not None:
        own = model.state_dict()
        donor = warm_start.state_dict()
        model.load_state_dict(
            {k: donor.get(k, v) if donor.get(k, v).shape == v.shape else v for k, v in own.items()}
        )
    model.train()
    lr_all, hr_all = _pairs_to_tensors(pairs, config.data_scale)
    n = lr_all.shape[0]
    optimizer = torch.optim.Adam(
        model.parameters(), lr=budget.learning_rate, weight_decay=budget.weight_decay
    )
    scheduler = None
    if budget.lr_decay:
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
            optimizer, T_max=budget.epochs, eta_min=budget.learning_rate / 10.0
        )
    shuffle_rng = np.random.default_rng(stable_seed("shuffle", seed, stage))
    mask_generator = None
    if config.dropout_p > 0:
        mask_generator = torch.Generator().manual_seed(stable_seed("dropout", seed, stage))
    floor_n = config.variance_floor / config.data_scale**2

    history = []
    for epoch in range(budget.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, budget.batch_size):
            idx = order[start : start + budget.batch_size]
            x = lr_all[idx]
            y = hr_all[idx]
            mean, logvar = model(x, mask_generator)
            if objective == "mse":
                loss = torch.mean((y - mean) ** 2)
            else:
                variance = torch.exp(torch.clamp(logvar, -LOGVAR_CLAMP, LOGVAR_CLAMP)) + floor_n
                residual, logdet = nll_terms(mean, variance, y)
                loss = residual + logdet
            optimizer.zero_grad()
            loss.backward()
            if budget.clip_grad_norm > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), budget.clip_grad_norm)
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(idx)
        if scheduler is not None:
            scheduler.step()
        history.append({"epoch": epoch, "loss": epoch_loss / n, "stage": stage})
    model.eval()
    return model, history


def training_mse(model: SRModel, pairs) -> float:
    """Deterministic-forward MSE over pairs, in raw Gauss^2.

    Runs one pair at a time so the value is identical to the public
    single-grid forward route (batched conv scheduling rounds differently).
    """
    cfg = model.config
    total = 0.0
    count = 0
    with torch.no_grad():
        for pair in pairs:
            x = torch.from_numpy(np.asarray(pair.lr, dtype=np.float64) / cfg.data_scale)
            x = x.float().unsqueeze(0).unsqueeze(0)
            mean, _ = model(x, None)
            pred = mean[0, 0].double().numpy() * cfg.data_scale
            total += float(np.sum((np.asarray(pair.hr, dtype=np.float64) - pred) ** 2))
            count += pred.size
    if count == 0:
        raise ValueError("training_mse needs at least one pair")
    return total / count


def train_variant(
    variant: str,
    pairs,
    config: ModelConfig,
    budget: TrainingBudget,
    seed: int,
    stage2_budget: TrainingBudget | None = None,
    stage1: TrainingResult | None = None,
) -> TrainingResult:
    """Train one table variant; NLL variants run the two-stage floor procedure.

    stage2_budget, when given, applies to the heteroskedastic stage only
    (the warm-started stage typically wants a gentler learning rate). An
    already-trained MSE variant can be passed as stage1 to serve as the
    homoskedastic stage instead of training a fresh one.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    dropout = variant in ("epistemic", "both")

    if variant in ("baseline", "epistemic"):
        cfg = with_variant(config, heads="mean_only", dropout=dropout)
        model, history = _train_loop(cfg, pairs, budget, seed, objective="mse", stage=variant)
        return TrainingResult(model=model, config=cfg, variant=variant, seed=seed, history=history)

    # two-stage: homoskedastic mean-only run fixes the variance floor
    if stage1 is not None:
        if stage1.config.heads != "mean_only":
            raise ValueError("stage1 result must come from a mean-only (MSE) variant")
        stage1_model, stage1_history = stage1.model, stage1.history
    else:
        stage1_cfg = with_variant(config, heads="mean_only", dropout=dropout)
        stage1_model, stage1_history = _train_loop(
            stage1_cfg, pairs, budget, seed, objective="mse", stage=f"{variant}-homoskedastic"
        )
    sigma_bar_sq = training_mse(stage1_model, pairs)
    if not (math.isfinite(sigma_bar_sq) and sigma_bar_sq > 0):
        raise RuntimeError(f"homoskedastic stage produced unusable variance floor {sigma_bar_sq}")

    cfg = with_variant(config, heads="mean_and_logvar", dropout=dropout, variance_floor=sigma_bar_sq)
    model, history = _train_loop(
        cfg, pairs, stage2_budget or budget, seed, objective="nll", stage=variant,
        warm_start=stage1_model,
    )
    return TrainingResult(
        model=model,
        config=cfg,
        variant=variant,
        seed=seed,
        history=history,
        variance_floor=sigma_bar_sq,
        stage1_history=stage1_history,
        stage1_model=stage1_model,
    )
