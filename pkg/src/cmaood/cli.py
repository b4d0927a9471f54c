"""Command-line entry point: ``cmaood <subcommand> ...``.

On failure every subcommand exits non-zero, prints one JSON error line to
stderr and removes any output files it had already written.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import io as hio
from .config import RunConfig, load_config
from .encoder import encoder_forward
from .errors import CmaError
from .experiment import RESULT_COLUMNS, run_experiment, summarize
from .metrics import detection_report, gap_report, roc_points
from .negmining import NegMiningConfig, mine_negatives
from .scoring import ScoreConfig, score_batch
from .train import pretrain, train
from .data import generate_synthetic


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _Outputs:
    """Tracks files and directories created by a subcommand for cleanup."""

    def __init__(self):
        self.paths = []

    def file(self, path) -> Path:
        path = Path(path)
        self.paths.append(path)
        return path

    def embeddings(self, path) -> Path:
        path = self.file(path)
        self.paths.append(hio.labels_path(path))
        return path

    def directory(self, path) -> Path:
        path = Path(path)
        if not path.exists():
            self.paths.append(path)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def remove(self):
        for p in reversed(self.paths):
            try:
                if p.is_dir():
                    for child in sorted(p.rglob("*"), reverse=True):
                        child.unlink() if child.is_file() else child.rmdir()
                    p.rmdir()
                elif p.exists():
                    p.unlink()
            except OSError:
                pass


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _read(path, args):
    return hio.read_embeddings(path, normalize=getattr(args, "normalize", False))


def cmd_gen_data(args, out: _Outputs):
    cfg = _config(args)
    spec = replace(cfg.synthetic, seed=cfg.seed)
    directory = out.directory(args.out)
    hio.save_dataset(generate_synthetic(spec), directory)
    hio.write_json(replace(cfg, synthetic=spec).to_dict(), out.file(directory / "config.json"))


def cmd_train(args, out: _Outputs):
    cfg = _config(args)
    dataset = hio.load_dataset(args.data)
    tcfg = replace(cfg.train, seed=cfg.seed)
    if args.lam is not None:
        tcfg = replace(tcfg, lam=args.lam)
    init = None
    pre_history = []
    if cfg.pretrain.max_epochs > 0 and not args.no_pretrain:
        init, pre_history = pretrain(dataset, replace(cfg.pretrain, lam=0.0, seed=cfg.seed))
    params, history = train(dataset, tcfg, init=init)
    directory = out.directory(args.out)
    resolved = replace(cfg, train=tcfg).to_dict()
    hio.save_checkpoint(params, directory, resolved, cfg.seed)
    out.file(directory / "params.npz")
    out.file(directory / "meta.json")
    for name, hist in (("history.csv", history), ("pretrain_history.csv", pre_history)):
        hio.write_csv(out.file(directory / name), ("epoch", "loss", "val_acc"),
                      [(h["epoch"], h["loss"], h["val_acc"]) for h in hist])
    hio.write_json(resolved, out.file(directory / "config.json"))


def cmd_embed(args, out: _Outputs):
    params = hio.load_checkpoint(args.ckpt)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        feats = hio.read_embeddings(args.features)
    emb = encoder_forward(params, args.modality, feats.rows, labels=feats.labels)
    hio.write_embeddings(emb, out.embeddings(args.out), args.dtype)


def cmd_mine(args, out: _Outputs):
    ids = _read(args.id, args)
    cands = _read(args.candidates, args)
    neg = mine_negatives(cands, ids, NegMiningConfig(args.eta, args.m))
    path = out.embeddings(args.out)
    hio.write_embeddings(neg.embeddings, path, args.dtype)
    hio.write_csv(out.file(str(path) + ".distances.csv"),
                  ("rank", "label", "candidate_index", "distance"),
                  [(r, lab, int(i), float(d)) for r, (lab, i, d)
                   in enumerate(zip(neg.labels, neg.indices, neg.distances))])


def cmd_score(args, out: _Outputs):
    if args.method == "neglabel" and not args.neg_texts:
        raise UsageError("--method neglabel requires --neg-texts")
    images = _read(args.images, args)
    id_texts = _read(args.id_texts, args)
    neg = _read(args.neg_texts, args) if args.neg_texts else None
    cfg = ScoreConfig(groups=args.groups or 100, grouping_enabled=args.groups is not None)
    sv = score_batch(images, id_texts, neg, cfg, args.method, tau=args.tau)
    labels = images.labels or [""] * len(sv)
    hio.write_csv(out.file(args.out), ("index", "label", "score"),
                  [(k, labels[k], float(s)) for k, s in enumerate(sv.scores)])


def cmd_eval(args, out: _Outputs):
    id_scores = hio.read_scores(args.id_scores)
    ood_scores = hio.read_scores(args.ood_scores)
    report = detection_report(id_scores, ood_scores, args.tpr)
    hio.write_json(report.to_dict(), out.file(args.out))
    if args.roc:
        fpr, tpr = roc_points(id_scores, ood_scores)
        hio.write_csv(out.file(args.roc), ("fpr", "tpr"), zip(fpr, tpr))
    if args.csv:
        hio.write_csv(out.file(args.csv), report.COLUMNS,
                      [[getattr(report, c) for c in report.COLUMNS]])


def cmd_gap(args, out: _Outputs):
    imgs = _read(args.id_images, args)
    txts = _read(args.id_texts, args)
    ood = _read(args.ood_texts, args)
    labels = txts.labels if args.exclude_same_label else None
    if imgs.n != txts.n:
        # one text per class: pair each image with the text carrying its label
        if imgs.labels is None or txts.labels is None:
            raise ValueError("image and text counts differ and labels are missing")
        lookup = {lab: k for k, lab in enumerate(txts.labels)}
        missing = sorted(set(imgs.labels) - set(lookup))
        if missing:
            raise ValueError(f"no ID text for image labels {missing[:5]}")
        txts = txts.subset([lookup[lab] for lab in imgs.labels])
        labels = imgs.labels
    report = gap_report(imgs, txts, ood, labels=labels)
    hio.write_json(report.to_dict(), out.file(args.out))
    if args.csv:
        hio.write_csv(out.file(args.csv), report.COLUMNS,
                      [[getattr(report, c) for c in report.COLUMNS]])


def parse_seeds(text: str):
    """``"0..4"`` (inclusive) or ``"0,2,5"``."""
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(x) for x in text.split(","))


def cmd_reproduce(args, out: _Outputs):
    cfg = _config(args)
    if args.seeds:
        cfg = replace(cfg, seeds=parse_seeds(args.seeds))
    rows = run_experiment(cfg.experiment())
    directory = out.directory(args.out)
    hio.write_csv(out.file(directory / "results.csv"), RESULT_COLUMNS,
                  [[r[c] for c in RESULT_COLUMNS] for r in rows])
    lams = cfg.lambdas
    summary = summarize(rows, lams[0], lams[-1])
    summary = {"lambda_base": lams[0], "lambda_cma": lams[-1], **summary}
    hio.write_json(summary, out.file(directory / "summary.json"))
    hio.write_json(cfg.to_dict(), out.file(directory / "config.json"))
    for name, ok in summary["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cmaood", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=1,
                        help="BLAS threads (default 1 for reproducibility)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="pretrain + fine-tune the toy dual encoder")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--lam", type=float, help="override train.lam")
    p.add_argument("--no-pretrain", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="run one encoder over a feature file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--modality", choices=("image", "text"), required=True)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("mine-negatives", help="select negative labels from a candidate corpus")
    p.add_argument("--id", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--m", type=int, default=10_000)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("score", help="MCM / NegLabel scores per image")
    p.add_argument("--images", required=True)
    p.add_argument("--id-texts", required=True)
    p.add_argument("--neg-texts")
    p.add_argument("--method", choices=("mcm", "neglabel"), required=True)
    p.add_argument("--groups", type=int)
    p.add_argument("--tau", type=float, help="default 1 for mcm, 0.01 for neglabel")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="FPR95 / AUROC from two score files")
    p.add_argument("--id-scores", required=True)
    p.add_argument("--ood-scores", required=True)
    p.add_argument("--tpr", type=float, default=0.95)
    p.add_argument("--roc", help="also write the (fpr, tpr) point list here")
    p.add_argument("--csv", help="also write the report as a one-row CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gap-metrics", help="uniformity / alignment report")
    p.add_argument("--id-images", required=True)
    p.add_argument("--id-texts", required=True)
    p.add_argument("--ood-texts", required=True)
    p.add_argument("--exclude-same-label", action="store_true",
                   help="Align-ID ignores competitors sharing the text label")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("reproduce-synthetic", help="lambda=0 vs CMA over several seeds")
    p.add_argument("--config")
    p.add_argument("--seeds", help="e.g. 0..4 or 0,1,2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reproduce)
    return parser


def _error_line(kind: str, message: str) -> str:
    return json.dumps({"error": kind, "message": message})


def main(argv=None) -> int:
    outputs = _Outputs()
    try:
        args = build_parser().parse_args(argv)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=args.threads):
            args.func(args, outputs)
    except UsageError as exc:
        outputs.remove()
        print(_error_line("UsageError", str(exc)), file=sys.stderr)
        return 2
    except (CmaError, OSError, ValueError, KeyError) as exc:
        outputs.remove()
        print(_error_line(type(exc).__name__, str(exc)), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
