"""Train-and-evaluate pipeline shared by the CLI sweeps and the demos."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from hcreid.data import split
from hcreid.evaluation import evaluate
from hcreid.trainer import center_distance_probe, train

SWEEP_AXES = {
    "lambda": ("hc", "lambda"),
    "T": ("train", "T"),
    "alpha": ("hc", "margin_alpha"),
    "p": ("model", "p"),
    "metric": ("hc", "metric"),
    "sampler": ("train", "sampler"),
    "constraint": ("hc", "constraint"),
    "loss": ("train", "loss"),
}


@dataclass
class RunResult:
    params: dict
    model_cfg: object
    history: object
    report: object
    center_distance: float

    @property
    def rank1(self):
        return self.report.mean["rank1"]

    @property
    def map(self):
        return self.report.map

    @property
    def final_hc(self):
        return self.history.epoch_hc[-1]


def split_for(cfg, dataset):
    return split(dataset, cfg.split.train_fraction, cfg.split.seed)


def run(cfg, dataset):
    """Split, train on the train identities, evaluate on the held-out ones."""
    train_set, test_set = split_for(cfg, dataset)
    model_cfg = cfg.model.build(dataset.shape, len(train_set.identity_set()))
    params, history = train(model_cfg, cfg.train, train_set)
    report = evaluate(params, model_cfg, test_set, cfg.eval)
    dist = center_distance_probe(params, model_cfg, test_set)
    return RunResult(params, model_cfg, history, report, dist)


def sweep_config(cfg, axis, value, seed=None):
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    section, key = SWEEP_AXES[axis]
    out = cfg.set(section, key, str(value))
    if seed is not None:
        out = replace(out, train=replace(out.train, seed=seed), eval=replace(out.eval, seed=seed))
    return out


def _sweep_point(args):
    cfg, dataset, axis, value, seed = args
    row = {"axis": axis, "value": value, "seed": seed if seed is not None else cfg.train.seed}
    try:
        res = run(sweep_config(cfg, axis, value, seed), dataset)
    except Exception as exc:  # a failed point is recorded, the sweep continues
        row.update(rank1="", map="", center_distance="", final_hc="", error=f"{type(exc).__name__}: {exc}")
        return row
    row.update(rank1=res.rank1, map=res.map, center_distance=res.center_distance, final_hc=res.final_hc, error="")
    return row


def sweep(cfg, dataset, axis, values, seeds=None, jobs=1):
    """One full train + eval per (value, seed); returns a list of row dicts."""
    seeds = list(seeds) if seeds else [None]
    tasks = [(cfg, dataset, axis, v, s) for v in values for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, tasks))
    return [_sweep_point(t) for t in tasks]


SWEEP_COLUMNS = ("axis", "value", "seed", "rank1", "map", "center_distance", "final_hc", "error")


def sweep_csv(rows, path=None):
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        cells = []
        for col in SWEEP_COLUMNS:
            v = row[col]
            if isinstance(v, (float, np.floating)):
                v = repr(float(v))
            cells.append(str(v).replace(",", ";"))
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
