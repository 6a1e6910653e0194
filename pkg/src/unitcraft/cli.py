"""Command-line interface.

Verbs: gen, segment, snapshot, stats, train, eval, replay, model-info, and
the path debugging helper. Exit codes: 0 success, 1 validation failure,
2 bad usage, 3 I/O error. Flag precedence: command line < config file <
the UNITCRAFT_SEED environment variable (seed only).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import evaluation, nn, pathing, report, scenegen, segmentation, world
from .model import ModelConfig, UnitTransformer, Vocab, VocabError
from .nn import AutodiffError
from .offline_env import StoreError, StoreMissError, StoreProvider, snapshot_units
from .pathing import PathError
from .scenegen import GenConfig, GenerationError
from .segmentation import SegmentationError
from .training import TrainConfig, TrainingError, apply_config, parse_config_text, train_corpus
from .world import WorldError

_VALIDATION_ERRORS = (
    WorldError,
    GenerationError,
    SegmentationError,
    StoreError,
    StoreMissError,
    PathError,
    VocabError,
    TrainingError,
    AutodiffError,
    evaluation.EvalError,
)


def _resolve_seed(flag_seed: int, config_seed: int | None = None) -> int:
    env = os.environ.get("UNITCRAFT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise TrainingError(f"UNITCRAFT_SEED is not an integer: {env!r}")
    if config_seed is not None:
        return config_seed
    return flag_seed


def _model_config(args) -> ModelConfig:
    return ModelConfig(
        d_model=args.d_model,
        num_heads=args.heads,
        num_layers=args.layers,
        max_dialogue=args.max_dialogue,
        max_detections=args.max_detections,
        seed=args.model_seed,
    )


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--max-dialogue", type=int, default=64)
    p.add_argument("--max-detections", type=int, default=16)
    p.add_argument("--model-seed", type=int, default=19980417)


# --- verbs -------------------------------------------------------------------


def cmd_gen(args) -> int:
    ratios = tuple(float(r) for r in args.ratios.split(","))
    if len(ratios) != 3:
        raise GenerationError(f"--ratios wants three numbers, got {args.ratios!r}")
    cfg = GenConfig(
        rng_seed=_resolve_seed(args.seed),
        grid_min=args.grid_min,
        grid_max=args.grid_max,
        templates=tuple(args.templates.split(",")),
        verbosity=args.verbosity,
        trailing_nav_steps=args.trailing_nav,
    )
    corpus = scenegen.generate_corpus(cfg, args.n, ratios)
    scenegen.save_corpus(corpus, args.out)
    total = sum(len(s) for s in corpus.splits.values())
    print(f"wrote {total} sessions to {args.out}")
    for name, sessions in corpus.splits.items():
        print(f"  {name}: {len(sessions)}")
    return 0


def cmd_segment(args) -> int:
    corpus = scenegen.load_corpus(args.corpus)
    os.makedirs(args.out, exist_ok=True)
    # identify the corpus by content, not location, so reruns byte-match
    params = {
        "level": args.level,
        "corpus_seed": corpus.manifest.get("rng_seed"),
        "corpus_n": corpus.manifest.get("n"),
    }
    for name, sessions in corpus.splits.items():
        out_dir = os.path.join(args.out, name)
        if args.level == "unit":
            units = [u for s in sessions for u in segmentation.segment_units(s)]
            segmentation.save_units(units, out_dir, params)
            print(f"{name}: {len(units)} units from {len(sessions)} sessions")
        elif args.level == "edh":
            edh = [e for s in sessions for e in segmentation.segment_edh(s)]
            segmentation.save_edh(edh, out_dir, params)
            print(f"{name}: {len(edh)} dialogue-turn instances")
        else:
            edh = [segmentation.session_instance(s) for s in sessions]
            segmentation.save_edh(edh, out_dir, params)
            print(f"{name}: {len(edh)} session instances")
    return 0


def cmd_snapshot(args) -> int:
    units = segmentation.load_units(args.units)
    paths = snapshot_units(units, args.out, jobs=args.jobs)
    print(f"wrote {len(paths)} panorama stores to {args.out}")
    return 0


def cmd_stats(args) -> int:
    corpus = scenegen.load_corpus(args.corpus)
    reports = {}
    for name, sessions in corpus.splits.items():
        if not sessions:
            continue
        if args.level == "unit":
            instances = [u for s in sessions for u in segmentation.segment_units(s)]
        else:
            instances = [e for s in sessions for e in segmentation.segment_edh(s)]
        reports[name] = segmentation.corpus_stats(instances)
    print(segmentation.stats_table(reports))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        csv_path = os.path.join(args.out, f"stats-{args.level}.csv")
        with open(csv_path, "w") as fh:
            fh.write(segmentation.stats_csv(reports))
        fig_path = os.path.join(args.out, f"stats-{args.level}.png")
        report.render_stats_bars(reports, fig_path)
        print(f"wrote {csv_path} and {fig_path}")
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig(
        lr=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        student_extra_steps=args.student_extra_steps,
        forcing=args.forcing,
        checkpoint_every=args.checkpoint_every,
    )
    config_seed = None
    if args.config:
        overrides = parse_config_text(open(args.config).read())
        cfg = apply_config(cfg, overrides)
        config_seed = overrides.get("seed")
    cfg = apply_config(cfg, {"seed": _resolve_seed(cfg.seed, config_seed)})

    units = segmentation.load_units(args.units)
    if not units:
        raise TrainingError(f"no units found under {args.units}")
    provider = StoreProvider(args.stores)
    model = UnitTransformer(_model_config(args), Vocab())
    os.makedirs(args.out, exist_ok=True)
    result = train_corpus(
        model,
        units,
        provider,
        cfg,
        log_path=os.path.join(args.out, "loss.csv"),
        checkpoint_dir=args.out,
    )
    report.render_loss_curve(result.epoch_losses, os.path.join(args.out, "loss.png"))
    print(f"trained {len(units)} units for {cfg.epochs} epochs")
    print(f"epoch losses: {['%.4f' % x for x in result.epoch_losses]}")
    print(f"final checkpoint: {os.path.join(args.out, 'final.ckpt')}")
    return 0


def _eval_instances(sessions, level: str):
    if level == "session":
        return [segmentation.session_instance(s) for s in sessions]
    instances = []
    dropped = 0
    for s in sessions:
        for e in segmentation.segment_edh(s):
            if e.goals and e.future_actions:
                instances.append(e)
            else:
                dropped += 1
    if dropped:
        print(f"note: skipped {dropped} spans without checkable state changes")
    return instances


def cmd_eval(args) -> int:
    corpus = scenegen.load_corpus(args.corpus)
    model = UnitTransformer(_model_config(args), Vocab())
    model.load(args.checkpoint)
    wanted = args.splits.split(",") if args.splits else list(corpus.splits)
    results = {}
    for name in wanted:
        if name not in corpus.splits:
            raise evaluation.EvalError(f"unknown split: {name}")
        instances = _eval_instances(corpus.splits[name], args.level)
        if not instances:
            raise evaluation.EvalError(f"split {name} has no evaluable instances")
        results[name] = evaluation.evaluate_split(model, instances, jobs=args.jobs)
    print(evaluation.metrics_table(results))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        csv_path = os.path.join(args.out, "metrics.csv")
        with open(csv_path, "w") as fh:
            fh.write(evaluation.metrics_csv(results))
        fig_path = os.path.join(args.out, "metrics.png")
        report.render_metric_bars(
            {n: r.aggregate for n, r in results.items()}, fig_path
        )
        for name, res in results.items():
            evaluation.export_trajectories(
                res.records, os.path.join(args.out, f"trajectories-{name}.jsonl")
            )
        print(f"wrote {csv_path} and {fig_path}")
    return 0


def cmd_replay(args) -> int:
    corpus = scenegen.load_corpus(args.corpus)
    count = 0
    for sessions in corpus.splits.values():
        for session in sessions:
            segmentation.validate_session(session)
            count += 1
    print(f"replayed {count} sessions cleanly")
    return 0


def cmd_model_info(args) -> int:
    if args.checkpoint:
        arrays = nn.load_checkpoint(args.checkpoint)
        counts: dict[str, int] = {}
        for name, arr in arrays.items():
            block = name.split(".")[0]
            counts[block] = counts.get(block, 0) + arr.size
        counts["total"] = sum(v for k, v in counts.items() if k != "total")
    else:
        counts = UnitTransformer(_model_config(args), Vocab()).parameter_counts()
    width = max(len(k) for k in counts)
    for name in sorted(k for k in counts if k != "total"):
        print(f"{name.ljust(width)}  {counts[name]:>10}")
    print(f"{'total'.ljust(width)}  {counts['total']:>10}")
    return 0


def _parse_pose(text: str) -> world.Pose:
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 4:
        raise PathError(f"pose wants x,y,hor,ver - got {text!r}")
    return world.Pose(*parts)


def cmd_path(args) -> int:
    corpus = scenegen.load_corpus(args.corpus)
    session = next(
        (
            s
            for sessions in corpus.splits.values()
            for s in sessions
            if s.session_id == args.session
        ),
        None,
    )
    if session is None:
        raise PathError(f"session not found: {args.session}")
    mask = world.nav_mask(session.scene)
    source = _parse_pose(args.source) if args.source else session.scene.agent
    target = _parse_pose(args.target)
    path = pathing.optimal_path(mask, source, target)
    print(" ".join(path.actions) if path.actions else "(already there)")
    print(pathing.path_arrows(path))
    print(f"cost: {path.cost}")
    return 0


# --- wiring ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unitcraft",
        description="Synthetic household sessions, unit-grained training, and closed-loop evaluation.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen", help="generate a session corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=19980417)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--grid-min", type=int, default=7)
    p.add_argument("--grid-max", type=int, default=10)
    p.add_argument("--templates", default=",".join(scenegen.TASK_TEMPLATES))
    p.add_argument("--verbosity", type=int, default=1, choices=(0, 1, 2))
    p.add_argument("--trailing-nav", type=int, default=1)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("segment", help="slice sessions into instances")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--level", default="unit", choices=("unit", "edh", "session"))
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("snapshot", help="prebuild panorama stores for units")
    p.add_argument("--units", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("stats", help="corpus statistics table")
    p.add_argument("--corpus", required=True)
    p.add_argument("--level", default="unit", choices=("unit", "edh"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="hybrid-forcing training over units")
    p.add_argument("--units", required=True)
    p.add_argument("--stores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=19980417)
    p.add_argument("--student-extra-steps", type=int, default=5)
    p.add_argument("--forcing", default="hybrid", choices=("hybrid", "teacher"))
    p.add_argument("--checkpoint-every", type=int, default=0)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="closed-loop evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits")
    p.add_argument("--level", default="session", choices=("session", "edh"))
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    _add_model_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="validate that demos replay cleanly")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("model-info", help="parameter counts per block")
    p.add_argument("--checkpoint")
    _add_model_flags(p)
    p.set_defaults(func=cmd_model_info)

    p = sub.add_parser("path", help="dump an optimal path as text arrows")
    p.add_argument("--corpus", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--source")
    p.add_argument("--target", required=True)
    p.set_defaults(func=cmd_path)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
