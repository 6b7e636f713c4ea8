"""Identity- and modality-balanced mini-batches versus the pairwise control.

The balanced sampler draws L identities and T samples of each modality per
identity, so every identity in a batch has both modality centers defined.
The control sampler draws same-identity pairs without regard to modality.
"""

import numpy as np

from hcreid import legacy_sample_batch, sample_batch, standard_benchmark

index = standard_benchmark().index()
rng = np.random.default_rng(0)

batch = sample_batch(index, L=4, T=8, rng=rng)
print(f"balanced batch: {len(batch)} samples")
for ident, (vis, ir) in batch.per_identity_counts().items():
    print(f"  identity {ident:2d}: {vis} visible, {ir} infrared")

control = legacy_sample_batch(index, 64, rng)
counts = control.per_identity_counts()
complete = sum(1 for v, i in counts.values() if v and i)
print(f"control batch: {len(control)} samples over {len(counts)} identities, "
      f"{complete} of them with both modalities")
