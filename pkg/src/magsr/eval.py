"""Evaluation: four-variant MSE table, degraded-consistency check, and the
conditional LR -> HR mean/variance mapping.

Full-corpus HMI reference MSEs for the four variants (documentation only;
desk-scale runs are not expected to reproduce them): baseline 88.45,
epistemic 90.00, aleatoric 90.47, both 98.10 Gauss^2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .degrade import DegradeConfig, degrade
from .inference import SampleSet, decompose, sample
from .loss import mse_loss
from .model import SRModel, forward
from .provenance import config_hash
from .train import TrainingBudget, TrainingResult, train_variant

# Full-corpus reference values (Gauss^2); never asserted by tests.
FULL_SCALE_REFERENCE_MSE = {
    "baseline": 88.45,
    "epistemic": 90.00,
    "aleatoric": 90.47,
    "both": 98.10,
}

VARIANT_LABELS = {
    "baseline": "baseline",
    "epistemic": "+ epistemic",
    "aleatoric": "+ aleatoric",
    "both": "+ epistemic & aleatoric",
}


@dataclass(frozen=True)
class VariantReport:
    variant: str
    test_mse: float  # Gauss^2, deterministic pass
    test_mse_normalized: float  # test_mse / data_scale^2
    mc_mse: float | None  # MC-mean MSE for dropout variants, else None
    n_patches: int
    config_hash: str

    def __post_init__(self):
        if self.test_mse < 0:
            raise ValueError("test_mse must be non-negative")

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "test_mse": self.test_mse,
            "test_mse_normalized": self.test_mse_normalized,
            "mc_mse": self.mc_mse,
            "n_patches": self.n_patches,
            "config_hash": self.config_hash,
            "full_scale_reference_mse": FULL_SCALE_REFERENCE_MSE[self.variant],
        }


@dataclass(frozen=True)
class ConsistencyReport:
    hr_spread: float  # mean pairwise RMS difference between HR sample means
    lr_spread: float  # same statistic after degrading each sample mean
    ratio: float  # lr_spread / hr_spread; 0 when hr_spread == 0


@dataclass(frozen=True)
class ConditionalStats:
    """Per-LR-value-bin statistics of the associated HR source-block pixels."""

    bin_edges: np.ndarray  # nbins + 1, monotone
    counts: np.ndarray
    hr_mean: np.ndarray
    hr_variance: np.ndarray

    def __post_init__(self):
        if not np.all(np.diff(self.bin_edges) > 0):
            raise ValueError("bin_edges must be strictly increasing")
        if np.any(self.hr_variance < 0):
            raise ValueError("hr_variance must be non-negative")

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def _model_config_hash(model: SRModel) -> str:
    from dataclasses import asdict

    return config_hash(asdict(model.config))


def evaluate_variant(model: SRModel, test_pairs, variant: str = "baseline", mc_samples: int = 0, base_seed: int = 0) -> VariantReport:
    """Deterministic-pass MSE of the mean head over all test pixels.

    For dropout models, mc_samples > 0 additionally reports the MSE of the
    MC predictive mean as a supplementary number.
    """
    if not test_pairs:
        raise ValueError("test set is empty")
    preds = np.stack([forward(model, p.lr).mean for p in test_pairs])
    targets = np.stack([p.hr for p in test_pairs])
    test_mse = mse_loss(preds, targets)

    mc = None
    if mc_samples > 0 and model.config.dropout_p > 0:
        if model.config.heads == "mean_and_logvar":
            mc_preds = np.stack(
                [
                    decompose(sample(model, p.lr, T=mc_samples, base_seed=base_seed)).predictive_mean
                    for p in test_pairs
                ]
            )
        else:
            from .inference import derive_sample_seed

            mc_preds = np.stack(
                [
                    np.mean(
                        [
                            forward(model, p.lr, stochastic=True, seed=derive_sample_seed(base_seed, t)).mean
                            for t in range(mc_samples)
                        ],
                        axis=0,
                    )
                    for p in test_pairs
                ]
            )
        mc = mse_loss(mc_preds, targets)

    return VariantReport(
        variant=variant,
        test_mse=test_mse,
        test_mse_normalized=test_mse / model.config.data_scale**2,
        mc_mse=mc,
        n_patches=len(test_pairs),
        config_hash=_model_config_hash(model),
    )


def zero_predictor_mse(pairs) -> float:
    """MSE of the all-zero predictor: mean of hr^2 over every test pixel."""
    return float(np.mean(np.stack([np.asarray(p.hr, dtype=np.float64) ** 2 for p in pairs])))


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x**2)))


def consistency_check(samples: SampleSet, lr_input: np.ndarray, degrade_config: DegradeConfig) -> ConsistencyReport:
    """Spread of HR explanations vs the spread of their degraded versions."""
    if samples.T < 2:
        raise ValueError("consistency check needs at least 2 samples")
    degraded = [degrade(m, degrade_config) for m in samples.means]
    hr_diffs = []
    lr_diffs = []
    for i, j in itertools.combinations(range(samples.T), 2):
        hr_diffs.append(_rms(samples.means[i] - samples.means[j]))
        lr_diffs.append(_rms(degraded[i] - degraded[j]))
    hr_spread = float(np.mean(hr_diffs))
    lr_spread = float(np.mean(lr_diffs))
    ratio = 0.0 if hr_spread == 0.0 else lr_spread / hr_spread
    return ConsistencyReport(hr_spread=hr_spread, lr_spread=lr_spread, ratio=ratio)


def conditional_mapping(pairs, bin_width: float) -> ConditionalStats:
    """Bin HR source-block pixels by their LR value; per-bin mean and
    population variance of the HR field."""
    if not pairs:
        raise ValueError("no pairs given")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")

    lr_values = []
    hr_values = []
    for pair in pairs:
        lr = np.asarray(pair.lr, dtype=np.float64)
        hr = np.asarray(pair.hr, dtype=np.float64)
        r = hr.shape[0] // lr.shape[0]
        # associate each LR pixel with its r x r HR source block
        blocks = hr.reshape(lr.shape[0], r, lr.shape[1], r).transpose(0, 2, 1, 3)
        lr_values.append(np.repeat(lr.ravel(), r * r))
        hr_values.append(blocks.reshape(-1))
    lr_values = np.concatenate(lr_values)
    hr_values = np.concatenate(hr_values)

    # half-open [edge, edge + width) bins aligned to multiples of bin_width;
    # the top edge sits strictly above the max so no value folds back
    lo = np.floor(lr_values.min() / bin_width) * bin_width
    hi = np.floor(lr_values.max() / bin_width) * bin_width + bin_width
    edges = np.arange(lo, hi + 0.5 * bin_width, bin_width)
    idx = np.clip(np.searchsorted(edges, lr_values, side="right") - 1, 0, len(edges) - 2)

    nbins = len(edges) - 1
    counts = np.zeros(nbins, dtype=np.int64)
    means = np.zeros(nbins)
    variances = np.zeros(nbins)
    for b in range(nbins):
        mask = idx == b
        counts[b] = int(mask.sum())
        if counts[b]:
            vals = hr_values[mask]
            means[b] = vals.mean()
            variances[b] = vals.var()  # population variance
    return ConditionalStats(bin_edges=edges, counts=counts, hr_mean=means, hr_variance=variances)


@dataclass
class Table1Outcome:
    reports: list  # four VariantReport, in VARIANTS order
    trained: dict  # variant -> TrainingResult


def run_table1(
    train_pairs,
    test_pairs,
    config,
    budget: TrainingBudget,
    seed: int,
    stage2_budget: TrainingBudget | None = None,
    mc_samples: int = 20,
    val_pairs=None,
) -> Table1Outcome:
    """Train the four variants with identical data, seeds and budget.

    The MSE-trained variants double as the homoskedastic stage of the NLL
    variants: baseline fixes the floor for aleatoric, epistemic for both.
    """
    del val_pairs  # reserved for early stopping; current budgets are fixed
    trained: dict[str, TrainingResult] = {}
    trained["baseline"] = train_variant("baseline", train_pairs, config, budget, seed)
    trained["epistemic"] = train_variant("epistemic", train_pairs, config, budget, seed)
    trained["aleatoric"] = train_variant(
        "aleatoric", train_pairs, config, budget, seed,
        stage2_budget=stage2_budget, stage1=trained["baseline"],
    )
    trained["both"] = train_variant(
        "both", train_pairs, config, budget, seed,
        stage2_budget=stage2_budget, stage1=trained["epistemic"],
    )
    reports = [
        evaluate_variant(res.model, test_pairs, variant=name, mc_samples=mc_samples)
        for name, res in trained.items()
    ]
    return Table1Outcome(reports=reports, trained=trained)


def format_table1(reports) -> str:
    """Plain-text table: variant rows with desk-scale and reference MSE."""
    lines = [
        f"{'Model':<28}{'MSE (Gauss^2)':>16}{'MC-mean MSE':>14}{'full-scale ref':>16}",
        "-" * 74,
    ]
    for rep in reports:
        mc = f"{rep.mc_mse:.2f}" if rep.mc_mse is not None else "-"
        lines.append(
            f"{VARIANT_LABELS[rep.variant]:<28}{rep.test_mse:>16.2f}{mc:>14}"
            f"{FULL_SCALE_REFERENCE_MSE[rep.variant]:>16.2f}"
        )
    return "\n".join(lines)


def write_conditional_csv(stats: ConditionalStats, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_center", "count", "hr_mean", "hr_variance"])
        for center, count, mean, var in zip(
            stats.bin_centers, stats.counts, stats.hr_mean, stats.hr_variance
        ):
            if count:
                writer.writerow([f"{center:.6g}", int(count), f"{mean:.10g}", f"{var:.10g}"])
