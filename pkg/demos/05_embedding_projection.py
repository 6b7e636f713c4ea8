"""Two-dimensional view of held-out descriptors.

Trains one model, projects the descriptors of the test identities onto their
top two principal components and writes ``embeddings.csv`` in the current
directory.  Per identity, the printed gap between the projected visible and
infrared means shows how far apart the two modalities still are.
"""

import numpy as np

from hcreid.config import RunConfig
from hcreid.data import generate
from hcreid.evaluation import project_2d, write_projection_csv
from hcreid.experiment import run, split_for
from hcreid.network import extract_descriptor

cfg = RunConfig()
dataset = generate(cfg.data)
result = run(cfg, dataset)
_, test = split_for(cfg, dataset)

coords = project_2d(extract_descriptor(result.params, result.model_cfg, test.features, test.modalities))
write_projection_csv("embeddings.csv", coords, test)

for ident in test.identity_set():
    sel = test.identities == ident
    vis = coords[sel & (test.modalities == 1)].mean(axis=0)
    ir = coords[sel & (test.modalities == 2)].mean(axis=0)
    print(f"identity {ident:2d}: modality gap in the projection {np.linalg.norm(vis - ir):.3f}")
