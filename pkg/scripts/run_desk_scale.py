#!/usr/bin/env python3
"""End-to-end desk-scale experiment: synth -> split -> train -> infer -> eval.

Produces a dated output directory with the synthetic dataset, the temporal
split, a trained dropout+heteroskedastic model, uncertainty maps with the
four-panel plot, and the four-variant evaluation table.

Usage:
    python scripts/run_desk_scale.py [--out OUTDIR] [--quick]

--quick shrinks budgets to a ~1 minute smoke run.
"""

import argparse
import sys
from pathlib import Path

from magsr.cli import main as magsr


def run(argv):
    print("+ magsr " + " ".join(str(a) for a in argv))
    code = magsr([str(a) for a in argv])
    if code != 0:
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/desk_scale")
    parser.add_argument("--quick", action="store_true", help="tiny budgets, ~1 minute")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    common = ["--model.base_channels", 16, "--model.depth", 2]
    if args.quick:
        common += [
            "--data.count", 26, "--train.epochs", 5, "--train.stage2_epochs", 5,
            "--infer.samples", 10, "--eval.mc_samples", 4, "--eval.consistency_samples", 5,
        ]
    else:
        common += ["--data.count", 360, "--infer.samples", 50]

    data = out / "data"
    split = out / "split.json"
    run(["synth", "--out", data, "--seed", 101, "--force", *common])
    run(["split", "--dataset", data, "--out", split, "--seed", 5, *common])
    run(["train", "--dataset", data, "--split", split, "--out", out / "train_both",
         "--train.variant", "both", "--seed", 9, *common])
    run(["infer", "--dataset", data, "--snapshot", out / "train_both" / "model.snap",
         "--out", out / "maps", "--seed", 33, *common])
    run(["eval", "--dataset", data, "--split", split, "--out", out / "eval",
         "--seed", 9, *common])
    print(f"\ndone; inspect {out}/eval/table1.txt and {out}/maps/maps.png")


if __name__ == "__main__":
    main()
