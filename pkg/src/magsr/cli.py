"""Command-line pipeline: synth, split, train, infer, eval.

Every command resolves a flat dotted-key config (defaults <- --config file
<- individual --<key> flags), embeds the resolved config plus input hashes
in its outputs, and is deterministic under fixed seeds at the level of
emitted data files.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import DEFAULTS, RunConfig, resolve_config
from .data import (
    SplitAssignment,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    make_pairs,
    make_temporal_split,
    write_dataset,
)
from .degrade import DegradeConfig, default_degrade_config, make_gaussian_kernel
from .eval import (
    conditional_mapping,
    consistency_check,
    format_table1,
    run_table1,
    write_conditional_csv,
    zero_predictor_mse,
)
from .inference import decompose, sample, save_maps_containers, save_maps_fits
from .model import ModelConfig, load_snapshot, save_snapshot
from .provenance import FORMAT_VERSION, sha256_file, write_json
from .train import TrainingBudget, train_variant
from .viz import save_four_panel

SEED_KEY_BY_COMMAND = {
    "synth": "data.seed",
    "split": "split.seed",
    "train": "train.seed",
    "infer": "infer.base_seed",
    "eval": "train.seed",
}


def degrade_config_from(cfg: RunConfig) -> DegradeConfig:
    scale = cfg["degrade.scale_factor"]
    size = cfg["degrade.kernel_size"]
    sigma = cfg["degrade.kernel_sigma"]
    if size <= 0 and sigma <= 0:
        return default_degrade_config(scale)
    if sigma <= 0:
        sigma = scale / 2.0
    if size <= 0:
        size = 2 * int(np.ceil(2.0 * sigma)) + 1
    return DegradeConfig(
        scale_factor=scale,
        kernel=make_gaussian_kernel(size, sigma),
        boundary_mode=cfg["degrade.boundary_mode"],
    )


def synthetic_spec_from(cfg: RunConfig) -> SyntheticSpec:
    return SyntheticSpec(
        count=cfg["data.count"],
        hr_size=cfg["data.hr_size"],
        active_region_count_range=(cfg["data.blob_min"], cfg["data.blob_max"]),
        field_amplitude=cfg["data.amplitude"],
        noise_model=cfg["data.noise_model"],
        noise_coefficient=cfg["data.noise_coefficient"],
        seed=cfg["data.seed"],
    )


def model_config_from(cfg: RunConfig) -> ModelConfig:
    return ModelConfig(
        scale_factor=cfg["degrade.scale_factor"],
        base_channels=cfg["model.base_channels"],
        depth=cfg["model.depth"],
        dropout_p=cfg["model.dropout_p"],
        data_scale=cfg["model.data_scale"],
    )


def budgets_from(cfg: RunConfig) -> tuple[TrainingBudget, TrainingBudget]:
    stage1 = TrainingBudget(
        epochs=cfg["train.epochs"],
        batch_size=cfg["train.batch_size"],
        learning_rate=cfg["train.learning_rate"],
        weight_decay=cfg["train.weight_decay"],
    )
    stage2 = TrainingBudget(
        epochs=cfg["train.stage2_epochs"],
        batch_size=cfg["train.batch_size"],
        learning_rate=cfg["train.stage2_learning_rate"],
        weight_decay=cfg["train.weight_decay"],
    )
    return stage1, stage2


def _months_by_year(mags) -> dict:
    years: dict = {}
    for mag in mags:
        if mag.timestamp is None:
            raise ValueError(f"magnetogram {mag.id} has no timestamp; cannot split")
        years.setdefault(mag.timestamp.year, set()).add(mag.timestamp.month)
    return {year: sorted(months) for year, months in years.items()}


def _pairs_for_part(mags, split: SplitAssignment, part: str, cfg: RunConfig):
    chosen = [
        m for m in mags if split.entries.get((m.timestamp.year, m.timestamp.month)) == part
    ]
    return make_pairs(chosen, cfg["data.patch_size"], degrade_config_from(cfg)), chosen


def cmd_synth(args, cfg: RunConfig) -> int:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        if not args.force:
            print(f"error: output directory {out} exists; use --force to overwrite", file=sys.stderr)
            return 2
        shutil.rmtree(out)
    spec = synthetic_spec_from(cfg)
    mags = generate_synthetic(spec)
    ids = write_dataset(out, mags)
    write_json(
        out / "manifest.json",
        {
            "format_version": FORMAT_VERSION,
            "kind": "synthetic-dataset",
            "config": cfg.to_json(),
            "ids": ids,
            "input_hashes": {},
        },
    )
    print(f"wrote {len(ids)} magnetograms to {out}")
    return 0


def cmd_split(args, cfg: RunConfig) -> int:
    dataset = Path(args.dataset)
    mags = load_dataset(dataset)
    split = make_temporal_split(_months_by_year(mags), cfg["split.seed"])
    payload = split.to_json()
    payload["format_version"] = FORMAT_VERSION
    payload["config"] = cfg.to_json()
    payload["input_hashes"] = {"dataset_manifest": sha256_file(dataset / "manifest.json")}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, payload)
    counts = {part: len(split.months(part)) for part in ("train", "val", "test")}
    print(f"split written to {out}: {counts}")
    return 0


def _load_split(path) -> SplitAssignment:
    return SplitAssignment.from_json(json.loads(Path(path).read_text()))


def cmd_train(args, cfg: RunConfig) -> int:
    dataset = Path(args.dataset)
    mags = load_dataset(dataset)
    split = _load_split(args.split)
    pairs, _ = _pairs_for_part(mags, split, "train", cfg)
    if not pairs:
        print("error: split assigns no training months to this dataset", file=sys.stderr)
        return 2

    stage1, stage2 = budgets_from(cfg)
    variant = cfg["train.variant"]
    result = train_variant(
        variant, pairs, model_config_from(cfg), stage1, seed=cfg["train.seed"], stage2_budget=stage2
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snapshot_path = out / "model.snap"
    metadata = {
        "variant": variant,
        "seed": cfg["train.seed"],
        "epochs": stage1.epochs,
        "loss": "nll" if variant in ("aleatoric", "both") else "mse",
        "variance_floor": result.variance_floor,
    }
    save_snapshot(result.model, snapshot_path, metadata)

    log_path = out / "training_log.csv"
    with open(log_path, "w") as fh:
        fh.write("stage,epoch,loss\n")
        for row in result.stage1_history + result.history:
            fh.write(f"{row['stage']},{row['epoch']},{row['loss']:.10g}\n")
    write_json(
        out / "train_meta.json",
        {
            "format_version": FORMAT_VERSION,
            "config": cfg.to_json(),
            "input_hashes": {
                "dataset_manifest": sha256_file(dataset / "manifest.json"),
                "split": sha256_file(args.split),
            },
            "variant": variant,
            "n_train_pairs": len(pairs),
            "variance_floor": result.variance_floor,
            "final_loss": result.final_loss,
            "model_config": asdict(result.config),
        },
    )
    floor_note = f", sigma_bar^2 = {result.variance_floor:.4f}" if result.variance_floor else ""
    print(f"trained {variant} on {len(pairs)} pairs{floor_note}; snapshot at {snapshot_path}")
    return 0


def cmd_infer(args, cfg: RunConfig) -> int:
    snapshot_path = Path(args.snapshot)
    if not snapshot_path.exists():
        print(f"error: snapshot {snapshot_path} does not exist", file=sys.stderr)
        return 2
    model = load_snapshot(snapshot_path)
    if model.config.heads != "mean_and_logvar":
        print("error: snapshot has no variance head; train variant aleatoric or both", file=sys.stderr)
        return 2

    dataset = Path(args.dataset)
    mags = load_dataset(dataset)
    index = cfg["infer.patch_index"]
    if not 0 <= index < len(mags):
        print(f"error: infer.patch_index {index} out of range [0, {len(mags)})", file=sys.stderr)
        return 2
    pairs = make_pairs([mags[index]], cfg["data.patch_size"], degrade_config_from(cfg))
    pair = pairs[0]

    maps = decompose(sample(model, pair.lr, T=cfg["infer.samples"], base_seed=cfg["infer.base_seed"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "T": maps.T,
        "base_seed": cfg["infer.base_seed"],
        "model_snapshot_hash": sha256_file(snapshot_path),
        "config": cfg.to_json(),
        "input_hashes": {"dataset_manifest": sha256_file(dataset / "manifest.json")},
        "source_id": mags[index].id,
    }
    if cfg["infer.format"] == "fits":
        save_maps_fits(out / "maps.fits", maps, {"RUNSEED": cfg["infer.base_seed"]})
        write_json(out / "maps.json", manifest)
    else:
        save_maps_containers(out, maps, manifest)
    save_four_panel(out / "maps.png", maps, target=pair.hr)
    print(f"wrote uncertainty maps (T={maps.T}) to {out}")
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    dataset = Path(args.dataset)
    mags = load_dataset(dataset)
    split = _load_split(args.split)
    train_pairs, _ = _pairs_for_part(mags, split, "train", cfg)
    val_pairs, _ = _pairs_for_part(mags, split, "val", cfg)
    test_pairs, _ = _pairs_for_part(mags, split, "test", cfg)
    if not train_pairs or not test_pairs:
        print("error: split leaves train or test empty", file=sys.stderr)
        return 2

    stage1, stage2 = budgets_from(cfg)
    outcome = run_table1(
        train_pairs,
        test_pairs,
        model_config_from(cfg),
        stage1,
        seed=cfg["train.seed"],
        stage2_budget=stage2,
        mc_samples=cfg["eval.mc_samples"],
        val_pairs=val_pairs,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    input_hashes = {
        "dataset_manifest": sha256_file(dataset / "manifest.json"),
        "split": sha256_file(args.split),
    }
    write_json(
        out / "table1.json",
        {
            "format_version": FORMAT_VERSION,
            "config": cfg.to_json(),
            "input_hashes": input_hashes,
            "zero_predictor_mse": zero_predictor_mse(test_pairs),
            "reports": [rep.to_json() for rep in outcome.reports],
        },
    )
    (out / "table1.txt").write_text(format_table1(outcome.reports) + "\n")

    stats = conditional_mapping(test_pairs, cfg["eval.bin_width"])
    write_conditional_csv(stats, out / "conditional_stats.csv")

    both = outcome.trained["both"]
    samples = sample(
        both.model, test_pairs[0].lr, T=cfg["eval.consistency_samples"], base_seed=cfg["infer.base_seed"]
    )
    report = consistency_check(samples, test_pairs[0].lr, degrade_config_from(cfg))
    write_json(
        out / "consistency.json",
        {
            "format_version": FORMAT_VERSION,
            "config": cfg.to_json(),
            "input_hashes": input_hashes,
            "hr_spread": report.hr_spread,
            "lr_spread": report.lr_spread,
            "ratio": report.ratio,
            "T": samples.T,
        },
    )
    for name, res in outcome.trained.items():
        save_snapshot(res.model, out / f"model_{name}.snap", {"variant": name})
    print(format_table1(outcome.reports))
    print(f"consistency ratio: {report.ratio:.4f}; reports in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magsr",
        description="Uncertainty-aware super-resolution of solar magnetograms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser):
        p.add_argument("--config", default=None, help="JSON config of dotted keys")
        p.add_argument("--seed", type=int, default=None, help="primary seed for this command")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--out", required=True, help="output directory or file")
        for key, (default, kind) in DEFAULTS.items():
            p.add_argument(
                f"--{key}",
                dest=key,
                type=str,
                default=None,
                metavar=kind.__name__.upper(),
                help=f"override (default {default})",
            )

    p_synth = sub.add_parser("synth", help="generate a synthetic magnetogram dataset")
    add_common(p_synth)

    p_split = sub.add_parser("split", help="assign (year, month) partitions")
    add_common(p_split)
    p_split.add_argument("--dataset", required=True)

    p_train = sub.add_parser("train", help="train one model variant")
    add_common(p_train)
    p_train.add_argument("--dataset", required=True)
    p_train.add_argument("--split", required=True)

    p_infer = sub.add_parser("infer", help="MC-dropout uncertainty maps for one input")
    add_common(p_infer)
    p_infer.add_argument("--dataset", required=True)
    p_infer.add_argument("--snapshot", required=True)

    p_eval = sub.add_parser("eval", help="four-variant table, conditional stats, consistency")
    add_common(p_eval)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--split", required=True)
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "split": cmd_split,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in DEFAULTS if getattr(args, key, None) is not None}
    if args.seed is not None:
        overrides[SEED_KEY_BY_COMMAND[args.command]] = args.seed
    try:
        cfg = resolve_config(args.config, overrides)
        return COMMANDS[args.command](args, cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
