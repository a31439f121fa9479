"""Command-line entry point.

Subcommands wire the library into complete workflows: ``synth`` writes
synthetic embedding datasets, ``train`` fits a classifier on one
language, ``eval`` scores a checkpoint, ``merge``/``plugin`` combine
models, ``crosseval`` fills the cross-lingual score matrix, ``inspect``
prints checkpoint facts. Exit codes: 0 success, 2 usage or
configuration error, 3 data or file-format error, 4 incompatible
architectures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from collm import ackp, merge as merge_mod, metrics, models, synth
from collm.data import join_for_fusion, read_embeddings, write_embeddings
from collm.errors import (
    CollmError,
    ConfigError,
    DataError,
    DegenerateWeightsError,
    FormatError,
    IncompatibleArchitectureError,
    NumericsError,
    UsageError,
)
from collm.ioutil import atomic_write_bytes
from collm.merge import MergeConfig
from collm.optim import TrainConfig, train

_GRANULARITY = {"tensor": "per_tensor", "layer": "per_layer", "model": "whole_model"}
_RESCALE = {"none": "none", "mean-norm": "mean_norm"}


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="master seed for all randomness (default 0)")
    common.add_argument("--precision", choices=("f32", "f64"), default="f32",
                        help="training/inference precision (default f32)")
    common.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collm",
        description="Train per-language audio-abuse classifiers on speech "
                    "embeddings and merge them into one unified model.",
    )
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="generate synthetic multi-language embedding data")
    p.add_argument("--languages", type=int, default=4)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--train", type=int, default=480, dest="train_count")
    p.add_argument("--test", type=int, default=120, dest="test_count")
    p.add_argument("--mode", choices=("shared", "disjoint"), default="shared")
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--nuisance", type=float, default=1.0)
    p.add_argument("--ptm", default="synthetic",
                   help="extractor tag recorded in the files")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train", parents=[common],
                       help="train one classifier on one language")
    p.add_argument("--arch", choices=("cnn", "transformer"), required=True)
    p.add_argument("--train", required=True, dest="train_file",
                   help="training embeddings (.aemb)")
    p.add_argument("--train2", default=None,
                   help="second embedding view for a fusion model")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--out", required=True, help="checkpoint output (.ackp)")

    p = sub.add_parser("eval", parents=[common],
                       help="score a checkpoint on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--data2", default=None,
                   help="second embedding view for a fusion model")
    p.add_argument("--format", choices=("json", "csv", "md"), default="json")

    p = sub.add_parser("merge", parents=[common],
                       help="merge checkpoints into one unified model")
    p.add_argument("--granularity", choices=tuple(_GRANULARITY), default="tensor")
    p.add_argument("--rescale", choices=tuple(_RESCALE), default="none")
    p.add_argument("--sum", action="store_true", dest="compat_sum",
                   help="sum normalized weights instead of averaging")
    p.add_argument("--report", default=None, help="write the merge report here")
    p.add_argument("--out", required=True)
    p.add_argument("checkpoints", nargs="+", metavar="CKPT")

    p = sub.add_parser("plugin", parents=[common],
                       help="fold one new model into a merged model")
    p.add_argument("--base", required=True)
    p.add_argument("--add", required=True)
    p.add_argument("--granularity", choices=tuple(_GRANULARITY), default="tensor")
    p.add_argument("--out", required=True)

    p = sub.add_parser("crosseval", parents=[common],
                       help="evaluate every model on every language")
    p.add_argument("--models", required=True, help="directory of .ackp files")
    p.add_argument("--data", required=True, help="directory of .aemb files")
    p.add_argument("--metric", choices=("acc", "f1"), default="acc")
    p.add_argument("--out", required=True, help="matrix CSV output path")

    p = sub.add_parser("inspect", parents=[common],
                       help="print checkpoint facts")
    p.add_argument("--model", required=True)
    return parser


def _say(args, message: str) -> None:
    """Progress notes go to stderr; stdout is reserved for payloads."""
    if not args.quiet:
        print(message, file=sys.stderr)


def _cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        n_languages=args.languages, dim=args.dim,
        train_count=args.train_count, test_count=args.test_count,
        mode=args.mode, separation=args.separation,
        nuisance_scale=args.nuisance, seed=args.seed, ptm=args.ptm,
    )
    generated = synth.synth_generate(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    from collm.data import SplitManifest
    for lang, (train_ds, test_ds) in generated.items():
        train_path = out_dir / f"{lang}_train.aemb"
        test_path = out_dir / f"{lang}_test.aemb"
        write_embeddings(train_ds, train_path)
        write_embeddings(test_ds, test_path)
        SplitManifest(language=lang, train_path=train_path.name,
                      test_path=test_path.name).save(out_dir / f"{lang}.manifest.json")
        _say(args, f"{lang}: {len(train_ds)} train / {len(test_ds)} test -> "
                   f"{train_path}, {test_path}")
    return 0


def _load_train_data(args):
    primary = read_embeddings(args.train_file)
    if args.train2 is None:
        return primary, [(primary.ptm, primary.dim)]
    secondary = read_embeddings(args.train2)
    paired = join_for_fusion(primary, secondary)
    return paired, [(primary.ptm, primary.dim), (secondary.ptm, secondary.dim)]


def _cmd_train(args) -> int:
    data, sources = _load_train_data(args)
    if len(sources) == 1:
        ptm, dim = sources[0]
        builder = models.build_cnn if args.arch == "cnn" else models.build_transformer
        spec = builder(dim, ptm=ptm)
    else:
        spec = models.build_fusion(
            models.PtmInfo(*sources[0]), models.PtmInfo(*sources[1]),
            "conv" if args.arch == "cnn" else "transformer",
        )
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch, lr=args.lr,
        val_fraction=args.val_frac, patience=args.patience,
        dropout=args.dropout, seed=args.seed, precision=args.precision,
    )
    ckpt, history = train(spec, data, cfg)
    atomic_write_bytes(args.out, ackp.checkpoint_to_bytes(ckpt))
    last = history[-1]
    best = max((h.val_macro_f1 for h in history if h.val_macro_f1 is not None),
               default=None)
    best_txt = f", best val macro-F1 {best * 100:.2f}" if best is not None else ""
    _say(args, f"trained {data.language} ({args.arch}) for {last.epoch} "
               f"epoch(s){best_txt} -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    ckpt = ackp.read_checkpoint(args.model)
    primary = read_embeddings(args.data)
    if args.data2 is not None:
        secondary = read_embeddings(args.data2)
        paired = join_for_fusion(primary, secondary)
        from collm.data import EmbeddingDataset
        dataset = [
            EmbeddingDataset(paired.language, paired.ptms[0], paired.ids,
                             paired.labels, paired.vectors_a),
            EmbeddingDataset(paired.language, paired.ptms[1], paired.ids,
                             paired.labels, paired.vectors_b),
        ]
        name = primary.language
    else:
        dataset = primary
        name = primary.language
    report = metrics.evaluate(ckpt, dataset)
    sys.stdout.write(metrics.render_report({name: report}, args.format))
    return 0


def _merge_config(args) -> MergeConfig:
    return MergeConfig(
        granularity=_GRANULARITY[args.granularity],
        rescale=_RESCALE[getattr(args, "rescale", "none")],
        compat_sum=getattr(args, "compat_sum", False),
    )


def _cmd_merge(args) -> int:
    ckpts = [ackp.read_checkpoint(p) for p in args.checkpoints]
    cfg = _merge_config(args)
    merged, report = merge_mod.collm_merge(ckpts, cfg)
    atomic_write_bytes(args.out, ackp.checkpoint_to_bytes(merged))
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.report:
        atomic_write_bytes(args.report, payload.encode())
    elif not args.quiet:
        sys.stdout.write(payload)
    _say(args, f"merged {len(ckpts)} checkpoint(s), languages "
               f"{list(merged.languages)}, n={merged.merge_count} -> {args.out}")
    return 0


def _cmd_plugin(args) -> int:
    base = ackp.read_checkpoint(args.base)
    incoming = ackp.read_checkpoint(args.add)
    merged = merge_mod.plugin_merge(base, incoming, _merge_config(args))
    atomic_write_bytes(args.out, ackp.checkpoint_to_bytes(merged))
    _say(args, f"plugged {args.add} into {args.base}, languages "
               f"{list(merged.languages)}, n={merged.merge_count} -> {args.out}")
    return 0


def _cmd_crosseval(args) -> int:
    model_dir, data_dir = Path(args.models), Path(args.data)
    model_files = sorted(model_dir.glob("*.ackp"))
    data_files = sorted(data_dir.glob("*.aemb"))
    if not model_files:
        raise UsageError(f"no .ackp files in {model_dir}")
    if not data_files:
        raise UsageError(f"no .aemb files in {data_dir}")
    checkpoints = {p.stem: ackp.read_checkpoint(p) for p in model_files}
    datasets = {}
    for p in data_files:
        ds = read_embeddings(p)
        datasets.setdefault(ds.language, ds)
    metric = "accuracy" if args.metric == "acc" else "macro_f1"
    columns = sorted(datasets)
    rows = []
    for name, ckpt in checkpoints.items():
        network = models.network_from_checkpoint(ckpt)
        scores = []
        for lang in columns:
            report = metrics.evaluate(ckpt, datasets[lang], network=network)
            value = report.accuracy if metric == "accuracy" else report.macro_f1
            scores.append(f"{value * 100:.2f}")
        rows.append([name, *scores])
    lines = [",".join(["train\\test", *columns])]
    lines += [",".join(row) for row in rows]
    atomic_write_bytes(args.out, ("\n".join(lines) + "\n").encode())
    _say(args, f"wrote {len(rows)}x{len(columns)} {metric} matrix -> {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    ckpt = ackp.read_checkpoint(args.model)
    spec = ckpt.spec
    print(f"arch_hash:   {ckpt.arch_hash}")
    print(f"block:       {spec.block}")
    print(f"inputs:      {[f'{p}:{d}' for p, d in spec.inputs]}")
    print(f"languages:   {list(ckpt.languages)}")
    print(f"merge_count: {ckpt.merge_count}")
    print(f"seed:        {ckpt.seed}")
    print(f"layers:      {len(spec.layers)}")
    for entry in spec.layers:
        hyper = {k: v for k, v in entry.items() if k not in ("kind", "name")}
        print(f"  {entry['name']:<16} {entry['kind']:<20} {hyper if hyper else ''}")
    print("tensors:")
    for name in ckpt.tensor_names():
        t = ckpt.tensors[name]
        l1 = float(np.abs(t.astype(np.float64)).sum())
        print(f"  {name:<24} {str(tuple(t.shape)):<16} L1={l1:.6g}")
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "merge": _cmd_merge,
    "plugin": _cmd_plugin,
    "crosseval": _cmd_crosseval,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FormatError, DegenerateWeightsError, NumericsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except IncompatibleArchitectureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except CollmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
