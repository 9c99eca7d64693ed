"""Reproduce the full desk-scale study: data, training, and every report.

Writes datasets, the trained checkpoint, and all evaluation reports under
--out (default runs/full-study). Expect roughly 15-25 minutes on one CPU
core; pass --quick for a structurally identical miniature run.
"""

import argparse
import sys
import time
from pathlib import Path

from presslab.cli import main as cli


def step(name, argv):
    print(f"\n== {name}: presslab {' '.join(argv)}", flush=True)
    t0 = time.time()
    code = cli(argv)
    print(f"   ({time.time() - t0:.0f}s)", flush=True)
    if code != 0:
        sys.exit(code)


def run(out: Path, quick: bool):
    out.mkdir(parents=True, exist_ok=True)
    n_pre = "60" if quick else "1000"
    n_eval = "20" if quick else "100"
    scenes = "30" if quick else "200"
    runs = "3" if quick else "10"

    step("pretraining corpus", [
        "--seed", "101", "gen-data", "--profile", "pretrain",
        "--n", n_pre, "--out", str(out / "data" / "pretrain"),
    ])
    step("fine-tune protocol", [
        "--seed", "202", "gen-data", "--profile", "finetune",
        "--out", str(out / "data" / "finetune"),
    ])
    step("held-out fruit clips", [
        "--seed", "303", "gen-data", "--profile", "eval",
        "--n", n_eval, "--out", str(out / "data" / "eval"),
    ])

    config = out / "train-config.json"
    if not config.exists():
        config.write_text(
            '{"t": 4, "frames": 4, "val_fraction": 0.1, '
            '"lstm_dropout": 0.1, "head_dropout": 0.1}\n'
        )
    step("two-phase training", [
        "--seed", "0", "--config", str(config), "train",
        "--data-pretrain", str(out / "data" / "pretrain"),
        "--data-finetune", str(out / "data" / "finetune"),
        "--out", str(out / "model"),
    ])

    ckpt = str(out / "model" / "checkpoint.json")
    step("staged-fruit ranking", [
        "--seed", "7", "eval-tactile", "--checkpoint", ckpt,
        "--out", str(out / "reports" / "ranking.json"),
    ])
    step("servoing geometry", [
        "--seed", "1", "eval-servoing", "--scenes", scenes,
        "--out", str(out / "reports" / "servoing.json"),
    ])
    step("scenario tiers", [
        "--seed", "42", "run-scenarios", "--runs", runs,
        "--checkpoint", ckpt,
        "--out", str(out / "reports" / "scenarios.json"),
    ])
    print(f"\nstudy artifacts under {out}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/full-study")
    ap.add_argument("--quick", action="store_true", help="miniature smoke-scale study")
    args = ap.parse_args()
    run(Path(args.out), args.quick)
