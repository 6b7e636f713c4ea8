import numpy as np
import pytest

from hcreid.sampler import DatasetIndex, SamplerError, batches_per_epoch, legacy_sample_batch, sample_batch


def make_index(n_ids=8, n_vis=10, n_ir=6):
    ids, idents, mods = [], [], []
    sid = 0
    for i in range(n_ids):
        for mod, count in ((1, n_vis), (2, n_ir)):
            for _ in range(count):
                ids.append(sid)
                idents.append(i)
                mods.append(mod)
                sid += 1
    return DatasetIndex.from_arrays(ids, idents, mods)


def check_paired(batch, index, L, T):
    assert len(batch) == 2 * L * T
    counts = batch.per_identity_counts()
    assert len(counts) == L
    assert all(c == (T, T) for c in counts.values())
    for sid, ident, mod in zip(batch.sample_ids, batch.labels, batch.modalities):
        assert sid in index.pools[int(ident)][mod - 1]


def test_default_batch_shape():
    index = make_index()
    batch = sample_batch(index, 4, 8, np.random.default_rng(0))
    check_paired(batch, index, 4, 8)


def test_single_pair():
    index = make_index()
    batch = sample_batch(index, 1, 1, np.random.default_rng(0))
    assert len(batch) == 2
    assert batch.labels[0] == batch.labels[1]
    assert sorted(batch.modalities.tolist()) == [1, 2]


def test_small_pool_draws_with_replacement():
    index = make_index(n_ids=4, n_vis=2, n_ir=1)
    batch = sample_batch(index, 2, 8, np.random.default_rng(0))
    check_paired(batch, index, 2, 8)


def test_large_pool_draws_without_replacement():
    index = make_index(n_vis=20, n_ir=20)
    rng = np.random.default_rng(1)
    for _ in range(100):
        batch = sample_batch(index, 4, 8, rng)
        assert len(set(batch.sample_ids.tolist())) == len(batch)


def test_too_few_identities():
    with pytest.raises(SamplerError):
        sample_batch(make_index(n_ids=3), 4, 8, np.random.default_rng(0))


def test_identity_missing_a_modality_is_ineligible():
    index = DatasetIndex.from_arrays([0, 1, 2, 3], [0, 0, 1, 1], [1, 2, 1, 1])
    assert index.eligible() == [0]
    with pytest.raises(SamplerError):
        sample_batch(index, 2, 1, np.random.default_rng(0))


def test_identity_frequencies_uniform_within_three_sigma():
    index = make_index(n_ids=8)
    rng = np.random.default_rng(2024)
    n_batches, L = 10_000, 2
    hits = np.zeros(8)
    for _ in range(n_batches):
        batch = sample_batch(index, L, 1, rng)
        hits[np.unique(batch.labels)] += 1
    p = L / 8
    sigma = np.sqrt(n_batches * p * (1 - p))
    assert np.all(np.abs(hits - n_batches * p) <= 3 * sigma), hits


def test_determinism():
    index = make_index()
    a = [sample_batch(index, 4, 8, np.random.default_rng(5)) for _ in range(2)]
    np.testing.assert_array_equal(a[0].sample_ids, a[1].sample_ids)


def test_legacy_batch():
    index = make_index()
    batch = legacy_sample_batch(index, 64, np.random.default_rng(0))
    assert len(batch) == 64
    # pairs share an identity
    assert np.all(batch.labels[0::2] == batch.labels[1::2])
    again = legacy_sample_batch(index, 64, np.random.default_rng(0))
    np.testing.assert_array_equal(batch.sample_ids, again.sample_ids)


def test_legacy_batch_is_not_modality_balanced():
    index = make_index()
    rng = np.random.default_rng(3)
    unbalanced = 0
    for _ in range(20):
        counts = legacy_sample_batch(index, 64, rng).per_identity_counts()
        unbalanced += sum(v != i for v, i in counts.values())
    assert unbalanced > 0


def test_legacy_requires_even_size():
    with pytest.raises(SamplerError):
        legacy_sample_batch(make_index(), 63, np.random.default_rng(0))


def test_batches_per_epoch():
    assert batches_per_epoch(960, 64) == 15
    assert batches_per_epoch(961, 64) == 16
