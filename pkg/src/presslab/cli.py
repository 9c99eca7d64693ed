"""Command-line entry points for data generation, training, evaluation,
and the HTTP service.

Every report is JSON with sorted keys so a fixed --seed yields byte-identical
files across runs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import (
    make_eval_fruit_set,
    make_finetune_set,
    make_pretrain_set,
    make_ranking_sets,
    load_dataset,
    save_dataset,
)
from .pipeline import SCENARIOS, evaluate_ranking, evaluate_servoing, run_scenario
from .training import (
    TrainConfig,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
    write_history_csv,
)
from .nn import ModelConfig
from .vision import GSAM_LIKE, YOLO_LIKE


def _load_config(path) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _write_json(path, payload) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _cmd_gen_data(args) -> int:
    out = Path(args.out)
    if args.profile == "pretrain":
        samples = make_pretrain_set(args.n or 1000, seed=args.seed)
        save_dataset(samples, out)
    elif args.profile == "finetune":
        samples = make_finetune_set(seed=args.seed)
        save_dataset(samples, out)
    elif args.profile == "eval":
        samples = make_eval_fruit_set(args.n or 100, seed=args.seed)
        save_dataset(samples, out)
    elif args.profile == "ranking":
        sets = make_ranking_sets(seed=args.seed)
        count = 0
        for condition, levels in sets.items():
            for level, hardness, clips in levels:
                from .data import LabeledClip

                save_dataset(
                    [LabeledClip(c, hardness, f"{condition}-{level}") for c in clips],
                    out / condition / level,
                )
                count += len(clips)
        print(f"wrote {count} ranking clips to {out}")
        return 0
    else:
        raise ValueError(f"unknown profile {args.profile!r}")
    print(f"wrote {len(samples)} clips to {out}")
    return 0


def _train_configs(args) -> tuple:
    overrides = _load_config(args.config)
    train_fields = {f for f in TrainConfig.__dataclass_fields__}
    model_fields = {f for f in ModelConfig.__dataclass_fields__}
    tc = {k: v for k, v in overrides.items() if k in train_fields}
    mc = {k: v for k, v in overrides.items() if k in model_fields and k != "seed"}
    tc.setdefault("seed", args.seed)
    config = TrainConfig(**tc)
    mc.setdefault("frames", config.t)
    return config, ModelConfig(**mc)


def _cmd_train(args) -> int:
    config, model_config = _train_configs(args)
    pretrain = load_dataset(args.data_pretrain) if args.data_pretrain else []
    finetune = load_dataset(args.data_finetune) if args.data_finetune else []
    if not pretrain and not finetune:
        raise ValueError("need --data-pretrain and/or --data-finetune")
    result = train(pretrain, finetune, config, model_config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.json", result.model, config)
    write_history_csv(out / "history.csv", result.history)
    metrics = {
        "wall_seconds": result.wall_seconds,
        "pretrain": None,
        "finetune": None,
    }
    for phase in ("pretrain", "finetune"):
        m = getattr(result, f"{phase}_metrics")
        if m is not None:
            metrics[phase] = {k: m[k] for k in ("rmse", "r2", "rho")}
    _write_json(out / "metrics.json", metrics)
    print(f"checkpoint + history written to {out}")
    return 0


def _cmd_eval_tactile(args) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    report = evaluate_ranking(model, meta["t"], seed=args.seed)
    _write_json(args.out, report)
    print(f"ranking report written to {args.out}")
    return 0


def _cmd_eval_servoing(args) -> int:
    report = evaluate_servoing(
        n_scenes=args.scenes,
        profiles=(YOLO_LIKE, GSAM_LIKE),
        depth_noise_sigma=args.depth_noise,
        seed=args.seed,
    )
    _write_json(args.out, report)
    print(f"servoing report written to {args.out}")
    return 0


def _cmd_run_scenarios(args) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    ids = sorted(SCENARIOS) if args.scenario == "all" else [int(args.scenario)]
    report = {}
    for sid in ids:
        rep = run_scenario(
            SCENARIOS[sid],
            model,
            meta["t"],
            runs=args.runs,
            seed=args.seed,
            depth_noise_sigma=args.depth_noise,
        )
        report[str(sid)] = rep.to_json()
    _write_json(args.out, report)
    print(f"scenario report written to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app

    model, meta = load_checkpoint(args.checkpoint)
    app = build_app(
        model,
        t=meta["t"],
        profile=GSAM_LIKE,
        data_dir=args.data_dir,
        seed=args.seed,
        depth_noise_sigma=args.depth_noise,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="presslab")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", help="JSON file overriding train/model config fields")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate clip corpora")
    p.add_argument("--profile", required=True, choices=("pretrain", "finetune", "eval", "ranking"))
    p.add_argument("--n", type=int, help="clip count where the profile allows it")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen_data)

    p = sub.add_parser("train", help="two-phase training")
    p.add_argument("--data-pretrain")
    p.add_argument("--data-finetune")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval-tactile", help="staged-fruit ranking significance")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval_tactile)

    p = sub.add_parser("eval-servoing", help="grounding geometry study")
    p.add_argument("--scenes", type=int, default=200)
    p.add_argument("--depth-noise", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval_servoing)

    p = sub.add_parser("run-scenarios", help="scenario tiers with OL/SL success rates")
    p.add_argument("--scenario", default="all", choices=("all", "1", "2", "3", "4"))
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--depth-noise", type=float, default=2.0)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_run_scenarios)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--depth-noise", type=float, default=2.0)
    p.set_defaults(fn=_cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary turns errors into exit codes
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
