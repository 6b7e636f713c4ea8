"""Identity-balanced mini-batch sampling.

:func:`sample_batch` draws ``L`` identities and ``T`` samples of each modality
per identity (``K = 2 * L * T``).  :func:`legacy_sample_batch` is the ablation
control: identity-balanced pairs with no per-modality guarantee.
"""

from dataclasses import dataclass

import numpy as np

VISIBLE, INFRARED = 1, 2


class SamplerError(ValueError):
    pass


@dataclass
class DatasetIndex:
    """``pools[identity] = (visible_ids, infrared_ids)``."""

    pools: dict

    @classmethod
    def from_arrays(cls, sample_ids, identities, modalities):
        pools = {}
        for sid, ident, mod in zip(sample_ids, identities, modalities):
            vis, ir = pools.setdefault(int(ident), ([], []))
            (vis if mod == VISIBLE else ir).append(int(sid))
        return cls(pools)

    def eligible(self):
        """Identities with at least one sample of each modality, sorted."""
        return sorted(k for k, (v, i) in self.pools.items() if v and i)

    def n_samples(self):
        return sum(len(v) + len(i) for v, i in self.pools.values())


@dataclass
class MiniBatch:
    sample_ids: np.ndarray
    labels: np.ndarray  # identities
    modalities: np.ndarray

    def __len__(self):
        return len(self.sample_ids)

    def per_identity_counts(self):
        """``{identity: (n_visible, n_infrared)}``."""
        out = {}
        for ident in np.unique(self.labels):
            sel = self.labels == ident
            out[int(ident)] = (
                int(np.sum(self.modalities[sel] == VISIBLE)),
                int(np.sum(self.modalities[sel] == INFRARED)),
            )
        return out


def _draw(rng, pool, k):
    # with replacement only when the pool is too small
    pool = np.asarray(pool)
    return rng.choice(pool, size=k, replace=len(pool) < k)


def sample_batch(index, L, T, rng):
    """Draw ``L`` distinct identities with ``T`` visible + ``T`` infrared samples each."""
    if L < 1 or T < 1:
        raise SamplerError("L and T must be positive")
    eligible = index.eligible()
    if len(eligible) < L:
        raise SamplerError(f"need {L} identities with both modalities, have {len(eligible)}")
    chosen = rng.choice(np.asarray(eligible), size=L, replace=False)
    ids, labels, mods = [], [], []
    for ident in chosen:
        vis, ir = index.pools[int(ident)]
        ids += [_draw(rng, vis, T), _draw(rng, ir, T)]
        labels.append(np.full(2 * T, ident))
        mods.append(np.repeat([VISIBLE, INFRARED], T))
    return MiniBatch(np.concatenate(ids), np.concatenate(labels), np.concatenate(mods))


def legacy_sample_batch(index, batch_size, rng):
    """Control sampler: ``batch_size / 2`` same-identity pairs, modality-agnostic.

    Identities are cycled through a random permutation so each appears at most
    once until all have been used.  Both samples of a pair come from the
    identity's pooled images regardless of modality, so per-identity modality
    counts are not balanced.
    """
    if batch_size < 2 or batch_size % 2:
        raise SamplerError("batch_size must be a positive even number")
    eligible = index.eligible()
    if not eligible:
        raise SamplerError("no identity has samples of both modalities")
    n_pairs = batch_size // 2
    reps = -(-n_pairs // len(eligible))
    order = np.concatenate([rng.permutation(eligible) for _ in range(reps)])[:n_pairs]
    ids, labels, mods = [], [], []
    for ident in order:
        vis, ir = index.pools[int(ident)]
        pool = np.array(vis + ir)
        pool_mods = np.array([VISIBLE] * len(vis) + [INFRARED] * len(ir))
        pick = rng.choice(len(pool), size=2, replace=len(pool) < 2)
        ids.append(pool[pick])
        mods.append(pool_mods[pick])
        labels.append(np.full(2, ident))
    return MiniBatch(np.concatenate(ids), np.concatenate(labels), np.concatenate(mods))


def batches_per_epoch(n_samples, K):
    return -(-n_samples // K)
