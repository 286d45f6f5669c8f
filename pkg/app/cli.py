"""Command-line front end: data generation, training, evaluation, ablations, export and serving."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import BaseModel

from app.core.config import RunConfig, WorldConfig, load_config, read_key_value_file, settings
from app.core.errors import DualAttentionError
from app.metrics.bleu import bleu
from app.metrics.cider import cider
from app.metrics.corpus import read_eval_corpus
from app.schemas.reports import CaptionReport
from app.training.ablation import run_ablation_suite
from app.training.checkpoint import load_pipeline
from app.training.evaluation import evaluate_checkpoint, exact_match_rate
from app.training.export import export_attention
from app.training.trainer import run_training
from app.utils.tables import report_table
from app.world.dataset import generate_dataset, load_dataset, load_world, save_dataset
from app.world.vocab import Vocabulary

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")


def _add_model_flags(parser: argparse.ArgumentParser, model: type[BaseModel], skip: Sequence[str] = ()) -> None:
    group = parser.add_argument_group(f"{model.__name__} fields")
    for name, info in model.model_fields.items():
        if name in skip:
            continue
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None, help=info.description or f"default: {info.default}")


def _flag_values(args: argparse.Namespace, model: type[BaseModel]) -> dict:
    return {name: getattr(args, name) for name in model.model_fields if getattr(args, name, None) is not None}


def _run_config(args: argparse.Namespace, data_dir, vocab: Vocabulary) -> RunConfig:
    """Dataset geometry, then the config file, then flags."""
    world = load_world(data_dir)
    values = {"grid_size": world.grid_size, "grid_h": world.grid_h, "grid_w": world.grid_w, "concepts": len(vocab.concepts)}
    if args.config:
        values.update(read_key_value_file(args.config))
    values.update(_flag_values(args, RunConfig))
    return load_config(RunConfig, overrides=values)


def _print_report(report, json_path: Optional[str]) -> None:
    print(report_table(report), end="")
    print(report.model_dump_json())
    if json_path:
        Path(json_path).write_text(report.model_dump_json(indent=2), encoding="utf-8")


def cmd_gen_data(args: argparse.Namespace) -> int:
    world = load_config(WorldConfig, args.config, _flag_values(args, WorldConfig))
    train, test, vocab = generate_dataset(args.seed, args.n_train, args.n_test, world)
    out = save_dataset(args.out, train, test, vocab, world)
    print(f"wrote {len(train)} train / {len(test)} test samples to {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    train, _, vocab = load_dataset(args.data)
    config = _run_config(args, args.data, vocab)
    result = run_training(config, train, vocab, args.out, resume=args.resume)
    print(f"trained {config.task}/{config.ablation} to step {result.step}: {result.checkpoint}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    report = evaluate_checkpoint(args.checkpoint, args.data, split=args.split, task=args.task)
    _print_report(report, args.json)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    train, test, vocab = load_dataset(args.data)
    config = _run_config(args, args.data, vocab)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    report = run_ablation_suite(config, train, test, vocab, seeds, args.out)
    _print_report(report, args.json)
    return 0


def cmd_export_attn(args: argparse.Namespace) -> int:
    pipeline = load_pipeline(args.checkpoint)
    train, test, _ = load_dataset(args.data)
    samples = train if args.split == "train" else test
    if not 0 <= args.index < len(samples):
        raise IndexError(f"sample index {args.index} outside the {len(samples)} {args.split} samples")
    written = export_attention(pipeline, samples[args.index], args.out, question_index=args.question)
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    corpus = read_eval_corpus(args.corpus)
    report = CaptionReport(
        samples=len(corpus),
        bleu_1=bleu(corpus, 1),
        bleu_2=bleu(corpus, 2),
        bleu_3=bleu(corpus, 3),
        bleu_4=bleu(corpus, 4),
        cider=cider(corpus),
        exact_match=exact_match_rate(corpus),
    )
    _print_report(report, args.json)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    if args.caption_checkpoint:
        settings.CAPTION_CHECKPOINT = args.caption_checkpoint
    if args.vqa_checkpoint:
        settings.VQA_CHECKPOINT = args.vqa_checkpoint
    from app.main import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dual-attention", description=__doc__)
    parser.add_argument("--log-level", default=None, help="overrides LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", help="generate a synthetic train/test split")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n-train", type=int, default=256)
    gen.add_argument("--n-test", type=int, default=64)
    gen.add_argument("--out", required=True)
    gen.add_argument("--config", help="key=value WorldConfig file")
    _add_model_flags(gen, WorldConfig)
    gen.set_defaults(handler=cmd_gen_data)

    train = commands.add_parser("train", help="train concepts, then the task model")
    train.add_argument("--data", required=True)
    train.add_argument("--out", required=True)
    train.add_argument("--config", help="key=value RunConfig file")
    train.add_argument("--resume", help="checkpoint to continue from")
    _add_model_flags(train, RunConfig)
    train.set_defaults(handler=cmd_train)

    ev = commands.add_parser("eval", help="metric report for a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--split", choices=SPLITS, default="test")
    ev.add_argument("--task", choices=("caption", "vqa"))
    ev.add_argument("--json", help="also write the report here")
    ev.set_defaults(handler=cmd_eval)

    ablate = commands.add_parser("ablate", help="train and evaluate every ablation variant")
    ablate.add_argument("--data", required=True)
    ablate.add_argument("--out", required=True)
    ablate.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated")
    ablate.add_argument("--config", help="key=value RunConfig file")
    ablate.add_argument("--json", help="also write the report here")
    _add_model_flags(ablate, RunConfig, skip=("ablation", "seed"))
    ablate.set_defaults(handler=cmd_ablate)

    export = commands.add_parser("export-attn", help="write attention maps for one sample")
    export.add_argument("--checkpoint", required=True)
    export.add_argument("--data", required=True)
    export.add_argument("--split", choices=SPLITS, default="test")
    export.add_argument("--index", type=int, default=0)
    export.add_argument("--question", type=int, help="only this question of a vqa sample")
    export.add_argument("--out", required=True)
    export.set_defaults(handler=cmd_export_attn)

    score = commands.add_parser("score", help="BLEU and CIDEr over an evaluation corpus file")
    score.add_argument("--corpus", required=True)
    score.add_argument("--json", help="also write the report here")
    score.set_defaults(handler=cmd_score)

    serve = commands.add_parser("serve", help="run the HTTP inference API")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--caption-checkpoint")
    serve.add_argument("--vqa-checkpoint")
    serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level or settings.LOG_LEVEL)
    try:
        return args.handler(args)
    except (DualAttentionError, IndexError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
