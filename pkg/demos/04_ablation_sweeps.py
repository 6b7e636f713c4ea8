"""One-axis ablations: margin, samples per modality, constraint, loss.

Each sweep trains and evaluates once per value on the same dataset and seed,
exactly as ``hcreid sweep`` does, and writes the table as CSV text.
"""

from hcreid.config import RunConfig
from hcreid.data import generate
from hcreid.experiment import sweep, sweep_csv

cfg = RunConfig()
dataset = generate(cfg.data)

for axis, values in (
    ("alpha", [0.0, 0.5, 1.0]),
    ("T", [2, 4, 8]),
    ("constraint", ["weak", "strong"]),
    ("loss", ["hc", "center"]),
    ("p", [1, 6]),
):
    rows = sweep(cfg, dataset, axis, values)
    print(sweep_csv(rows))
