"""``basisguard`` command line.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .. import defenses as defense_ops
from ..attacks import AttackSpec, run_attack
from ..errors import BasisGuardError, ConfigError
from ..formats import read_image, write_image
from ..model import Classifier, TrainConfig, load_checkpoint, save_checkpoint, train
from .config import SETTINGS, check_files, load_config
from .data import eval_batch, load_split
from .experiments import NO_ATTACK, _evaluate, benign_ordering_flags, benign_report, run_setting
from .results import export_results, load_results

log = logging.getLogger("basisguard")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _common(p, config_required=True):
    p.add_argument("--config", type=Path, required=config_required, help="experiment TOML file")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="seed recorded with results / used for training")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="image-level worker threads")


def build_parser():
    parser = argparse.ArgumentParser(prog="basisguard", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train model A and model B")
    _common(p)

    p = sub.add_parser("attack", help="generate adversarial batches against model A")
    _common(p)

    p = sub.add_parser("defend", help="apply the configured defenses to images")
    _common(p)
    p.add_argument("inputs", nargs="+", type=Path, help="PNG/PPM images or .npz batches (key `x_adv` or `images`)")

    p = sub.add_parser("evaluate", help="evaluate a saved adversarial batch under every defense")
    _common(p)
    p.add_argument("--setting", choices=("gray", "black"), default="gray")
    p.add_argument("batch", type=Path, help=".npz written by `attack`")

    p = sub.add_parser("sweep", help="run full attack/defense sweeps and export results")
    _common(p)
    p.add_argument("--setting", choices=SETTINGS, help="run only this setting")

    p = sub.add_parser("export", help="re-export a results JSON as CSV and .dat tables")
    p.add_argument("results", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--config", type=Path, help=argparse.SUPPRESS)
    return parser


def _load(args):
    cfg = load_config(args.config)
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.threads = max(1, args.threads)
    return cfg


def cmd_train(args):
    cfg = _load(args)
    t = cfg.train
    images, labels = load_split(cfg.dataset.path, t.split, cfg.dataset.format)
    test = load_split(cfg.dataset.path, cfg.dataset.split, cfg.dataset.format)
    seeds = {"a": t.seed_a, "b": t.seed_b}
    if args.seed is not None:
        seeds = {"a": args.seed, "b": args.seed + 1}
    targets = {"a": cfg.model_a, "b": cfg.model_b}
    for key, seed in seeds.items():
        target = targets[key]
        if target is None:
            continue
        if args.out is not None:
            target = args.out / target.name
        model = Classifier.initialized(images.shape[1:], int(labels.max()) + 1, seed=seed)
        conf = TrainConfig(epochs=t.epochs, batch=t.batch, lr=t.lr, momentum=t.momentum, seed=seed)
        model, report = train(model, images, labels, conf, test=test)
        target.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, target)
        print(f"model {key}: seed={seed} train={report['train_accuracy']:.4f} "
              f"test={report['test_accuracy']:.4f} -> {target}")
    return EXIT_OK


def cmd_attack(args):
    cfg = _load(args)
    check_files(cfg)
    x, y = eval_batch(cfg.dataset)
    model = load_checkpoint(cfg.model_a)
    cfg.out.mkdir(parents=True, exist_ok=True)
    for spec in cfg.attacks:
        x_adv = run_attack(spec, model, x, y, cfg.threads)
        path = cfg.out / f"adv_{spec.method}_{spec.strength:g}.npz"
        np.savez_compressed(path, x=x, x_adv=x_adv, labels=y, spec=json.dumps(spec.to_dict()))
        print(path)
    return EXIT_OK


def _read_batch(path):
    if path.suffix == ".npz":
        with np.load(path) as archive:
            key = "x_adv" if "x_adv" in archive else "images"
            return np.asarray(archive[key], dtype=np.float64)
    return read_image(path)[None]


def cmd_defend(args):
    cfg = _load(args)
    cfg.out.mkdir(parents=True, exist_ok=True)
    for path in args.inputs:
        batch = _read_batch(path)
        for d in cfg.defenses:
            out = defense_ops.apply_batch(d, batch, cfg.threads)
            if path.suffix == ".npz":
                target = cfg.out / f"{path.stem}_{d.name}.npz"
                np.savez_compressed(target, images=out)
            else:
                target = cfg.out / f"{path.stem}_{d.name}{path.suffix}"
                write_image(target, out[0])
            print(target)
    return EXIT_OK


def cmd_evaluate(args):
    cfg = _load(args)
    check_files(cfg, need_b=args.setting == "black")
    with np.load(args.batch) as archive:
        x, x_adv, y = archive["x"], archive["x_adv"], archive["labels"]
        attack = AttackSpec.from_dict(json.loads(str(archive["spec"]))) if "spec" in archive else NO_ATTACK
    model = load_checkpoint(cfg.model_b if args.setting == "black" else cfg.model_a)
    records = _evaluate(args.setting, attack, x, x_adv, y, cfg.defenses, model, cfg.seed, cfg.threads)
    for r in records:
        print(f"{r.defense.name:16s} top1={r.top1_accuracy:.4f} normalized_l2={r.normalized_l2:.4f}")
    export_results(records, cfg.out, stem=f"evaluate_{args.batch.stem}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load(args)
    settings = (args.setting,) if args.setting else cfg.settings
    check_files(cfg, need_b="black" in settings)
    x, y = eval_batch(cfg.dataset)
    model_a = load_checkpoint(cfg.model_a)
    model_b = load_checkpoint(cfg.model_b) if "black" in settings else None
    records = []
    for setting in settings:
        part = run_setting(setting, model_a, model_b, x, y, cfg.attacks, cfg.defenses, cfg.seed, cfg.threads)
        for name, (drop, flagged) in benign_report(part, cfg.benign_tolerance).items():
            if flagged:
                log.warning("%s: defense %s costs %.3f benign accuracy (tolerance %.3f)",
                            setting, name, drop, cfg.benign_tolerance)
        for a, b, da, db in benign_ordering_flags(benign_report(part, cfg.benign_tolerance)):
            log.warning("%s: benign drop of %s (%.3f) is not below that of %s (%.3f)", setting, a, da, b, db)
        records.extend(part)
    for p in export_results(records, cfg.out):
        print(p)
    return EXIT_OK


def cmd_export(args):
    records = load_results(args.results)
    for p in export_results(records, args.out, stem=args.results.stem):
        print(p)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "defend": cmd_defend,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "export": cmd_export,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BasisGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
