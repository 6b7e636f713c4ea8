"""``hcreid`` command line: gen, train, eval, sweep, export-embeddings."""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from hcreid import data as data_mod
from hcreid.config import ConfigError, RunConfig, load_config, parse_ini
from hcreid.evaluation import MULTI_SHOT, SINGLE_SHOT, evaluate, project_2d, write_projection_csv
from hcreid.experiment import SWEEP_AXES, split_for, sweep, sweep_csv
from hcreid.network import extract_descriptor, load_checkpoint, save_checkpoint
from hcreid.trainer import TrainingDiverged, train

DATASET_FILE = "dataset.txt"
CHECKPOINT_FILE = "checkpoint.json"


class CliError(Exception):
    pass


def _out_dir(args):
    out = Path(args.out)
    if not out.is_dir():
        raise CliError(f"output directory {out} does not exist")
    return out


def _overrides(args):
    pairs = list(args.set or [])
    for flag, key in (
        ("lam", "hc.lambda"),
        ("loss", "train.loss"),
        ("epochs", "train.epochs"),
        ("alpha", "hc.margin_alpha"),
        ("metric", "hc.metric"),
        ("constraint", "hc.constraint"),
        ("sampler", "train.sampler"),
        ("trials", "eval.trials"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            pairs.append(f"{key}={value}")
    shot = getattr(args, "shot", None)
    if shot is not None:
        shot = {"single": SINGLE_SHOT, "multi": MULTI_SHOT}.get(shot, shot)
        pairs.append(f"eval.shot={shot}")
    return pairs


def _config(args, base=None):
    cfg = load_config(args.config) if args.config else (base or RunConfig())
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    by_section = {}
    for item in _overrides(args):
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise CliError(f"--set expects section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        section, key = lhs.split(".", 1)
        by_section.setdefault(section, {})[key] = value
    for section, values in by_section.items():
        cfg = cfg.update(section, values)
    return cfg


def _load_dataset(path):
    if not Path(path).is_file():
        raise CliError(f"dataset file {path} does not exist")
    return data_mod.load(path)


def cmd_gen(args):
    out = _out_dir(args)
    cfg = _config(args)
    ds = data_mod.generate(cfg.data)
    data_mod.save(ds, out / DATASET_FILE)
    cfg.save(out / "config.ini")
    n_vis = int(np.sum(ds.modalities == 1))
    print(f"wrote {out / DATASET_FILE}: {len(ds)} samples, {len(ds.identity_set())} identities, "
          f"{n_vis} visible / {len(ds) - n_vis} infrared")


def cmd_train(args):
    out = _out_dir(args)
    cfg = _config(args)
    ds = _load_dataset(args.data)
    train_set, test_set = split_for(cfg, ds)
    model_cfg = cfg.model.build(ds.shape, len(train_set.identity_set()))
    start = time.perf_counter()
    params, history = train(model_cfg, cfg.train, train_set, heldout=test_set)
    elapsed = time.perf_counter() - start
    meta = {"config": cfg.to_ini(), "train_identities": train_set.identity_set()}
    save_checkpoint(out / CHECKPOINT_FILE, params, model_cfg, meta)
    history.to_csv(out / "history.csv")
    cfg.save(out / "config.ini")
    print(f"trained {len(history)} steps in {elapsed:.1f}s: ce={history.epoch_ce[-1]:.4f} "
          f"hc={history.epoch_hc[-1]:.4f} total={history.epoch_total[-1]:.4f} "
          f"center_distance={history.epoch_center_distance[-1]:.4f}")


def _checkpoint_and_test(args):
    params, model_cfg, meta = load_checkpoint(args.checkpoint)
    base = parse_ini(meta["config"]) if "config" in meta else None
    cfg = _config(args, base)
    ds = _load_dataset(args.data)
    _, test_set = split_for(cfg, ds)
    return params, model_cfg, cfg, test_set


def _write_embeddings(path, params, model_cfg, test_set):
    desc = extract_descriptor(params, model_cfg, test_set.features, test_set.modalities)
    write_projection_csv(path, project_2d(desc), test_set)


def cmd_eval(args):
    out = _out_dir(args)
    params, model_cfg, cfg, test_set = _checkpoint_and_test(args)
    report = evaluate(params, model_cfg, test_set, cfg.eval)
    report.to_json(out / "report.json")
    cfg.save(out / "config.ini")
    if args.project2d:
        _write_embeddings(out / "embeddings.csv", params, model_cfg, test_set)
    print(f"rank1={report.mean['rank1']:.4f} (std {report.std['rank1']:.4f}) "
          f"mAP={report.map:.4f} over {cfg.eval.trials} trials")


def cmd_export_embeddings(args):
    out = _out_dir(args)
    params, model_cfg, _, test_set = _checkpoint_and_test(args)
    _write_embeddings(out / "embeddings.csv", params, model_cfg, test_set)
    print(f"wrote {out / 'embeddings.csv'}: {len(test_set)} samples")


def cmd_sweep(args):
    out = _out_dir(args)
    cfg = _config(args)
    ds = _load_dataset(args.data) if args.data else data_mod.generate(cfg.data)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    rows = sweep(cfg, ds, args.axis, values, seeds=seeds, jobs=args.jobs)
    sweep_csv(rows, out / "sweep.csv")
    cfg.save(out / "config.ini")
    failed = [r for r in rows if r["error"]]
    for r in rows:
        status = f"FAILED {r['error']}" if r["error"] else f"rank1={r['rank1']:.4f} mAP={r['map']:.4f} dist={r['center_distance']:.4f}"
        print(f"{args.axis}={r['value']} seed={r['seed']}: {status}")
    if failed:
        raise CliError(f"{len(failed)} of {len(rows)} sweep points failed")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="seed applied to every stage")
    common.add_argument("--out", default=".", help="existing output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")

    parser = argparse.ArgumentParser(prog="hcreid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--loss", choices=("hc", "center"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--metric", choices=("sqeuclidean", "cosine"))
    p.add_argument("--constraint", choices=("weak", "strong"))
    p.add_argument("--sampler", choices=("paired", "legacy"))
    p.set_defaults(func=cmd_train)

    for name, func in (("eval", cmd_eval), ("export-embeddings", cmd_export_embeddings)):
        p = sub.add_parser(name, parents=[common], help=f"{name} a checkpoint on the held-out identities")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", required=True)
        if name == "eval":
            p.add_argument("--shot", help="single, multi, or a gallery count per identity")
            p.add_argument("--trials", type=int)
            p.add_argument("--project2d", action="store_true", help="also write embeddings.csv")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", parents=[common], help="train + eval across one axis")
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", help="comma-separated training seeds; one row per (value, seed)")
    p.add_argument("--data", help="dataset file; generated from [data] when omitted")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, ConfigError, TrainingDiverged, ValueError, KeyError, OSError) as exc:
        print(f"hcreid {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
