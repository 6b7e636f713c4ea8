"""Synthetic two-modality datasets and their on-disk text format.

Each sample is the sum of an identity pattern (shared by both modalities), a
modality offset pattern (shared by every identity of that modality) and
i.i.d. Gaussian noise.  With ``stripe_structure`` the identity pattern differs
between horizontal bands, so local stripe features carry more identity
information than a global average.

File format (UTF-8)::

    H W C
    sample_id identity modality camera v1 v2 ... v(H*W*C)

Feature values are written row-major with 17 significant digits.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hcreid.sampler import DatasetIndex

VISIBLE, INFRARED = 1, 2


class DatasetFormatError(ValueError):
    """Malformed dataset file; the message names the offending line."""


@dataclass(frozen=True)
class SynthSpec:
    n_identities: int = 32
    samples_per_modality: int = 20
    input_shape: tuple = (12, 4, 8)
    identity_signal_scale: float = 1.0
    modality_gap_scale: float = 1.0
    noise_scale: float = 0.3
    stripe_structure: bool = True
    n_bands: int = 6
    visible_cameras: tuple = (1, 2, 4, 5)
    infrared_cameras: tuple = (3, 6)
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        object.__setattr__(self, "visible_cameras", tuple(int(c) for c in self.visible_cameras))
        object.__setattr__(self, "infrared_cameras", tuple(int(c) for c in self.infrared_cameras))
        if min(self.identity_signal_scale, self.modality_gap_scale, self.noise_scale) < 0:
            raise ValueError("scales must be non-negative")
        if self.n_identities < 1 or self.samples_per_modality < 1:
            raise ValueError("counts must be positive")
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError("input_shape must be three positive ints (H, W, C)")
        if self.stripe_structure and not 1 <= self.n_bands <= self.input_shape[0]:
            raise ValueError("n_bands must lie in [1, H]")
        if not self.visible_cameras or not self.infrared_cameras:
            raise ValueError("each modality needs at least one camera tag")


@dataclass
class Dataset:
    sample_ids: np.ndarray
    identities: np.ndarray
    modalities: np.ndarray
    cameras: np.ndarray
    features: np.ndarray  # (n, H, W, C)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)
        self.identities = np.asarray(self.identities, dtype=np.int64)
        self.modalities = np.asarray(self.modalities, dtype=np.int64)
        self.cameras = np.asarray(self.cameras, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        n = len(self.sample_ids)
        if not (len(self.identities) == len(self.modalities) == len(self.cameras) == len(self.features) == n):
            raise ValueError("dataset columns must have equal length")
        if self.features.ndim != 4:
            raise ValueError("features must have shape (n, H, W, C)")

    def __len__(self):
        return len(self.sample_ids)

    @property
    def shape(self):
        return tuple(self.features.shape[1:])

    def identity_set(self):
        return sorted(int(i) for i in np.unique(self.identities))

    def subset(self, mask):
        return Dataset(
            self.sample_ids[mask],
            self.identities[mask],
            self.modalities[mask],
            self.cameras[mask],
            self.features[mask],
            dict(self.meta),
        )

    def index(self):
        return DatasetIndex.from_arrays(self.sample_ids, self.identities, self.modalities)

    def positions(self, sample_ids):
        """Row positions of the given sample ids."""
        lookup = {int(s): i for i, s in enumerate(self.sample_ids)}
        return np.array([lookup[int(s)] for s in sample_ids], dtype=np.int64)

    def equals(self, other):
        return (
            self.shape == other.shape
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("sample_ids", "identities", "modalities", "cameras", "features")
            )
        )


def generate(spec):
    """Build a dataset from ``spec``; identical specs give identical datasets."""
    rng = np.random.default_rng(spec.seed)
    H, W, C = spec.input_shape
    offsets = {m: rng.standard_normal((H, W, C)) for m in (VISIBLE, INFRARED)}
    if spec.stripe_structure:
        band_of_row = (np.arange(H) * spec.n_bands) // H
    else:
        band_of_row = np.zeros(H, dtype=np.int64)
    n_bands = int(band_of_row.max()) + 1
    cams = {VISIBLE: spec.visible_cameras, INFRARED: spec.infrared_cameras}

    ids, idents, mods, cameras, feats = [], [], [], [], []
    sid = 0
    for ident in range(spec.n_identities):
        # rows of one band share a (W, C) pattern; without stripes every row does
        pattern = rng.standard_normal((n_bands, W, C))[band_of_row]
        for mod in (VISIBLE, INFRARED):
            base = spec.identity_signal_scale * pattern + spec.modality_gap_scale * offsets[mod]
            noise = rng.standard_normal((spec.samples_per_modality, H, W, C))
            feats.append(base + spec.noise_scale * noise)
            for j in range(spec.samples_per_modality):
                ids.append(sid)
                idents.append(ident)
                mods.append(mod)
                cameras.append(cams[mod][j % len(cams[mod])])
                sid += 1
    meta = {"offsets": offsets}
    return Dataset(ids, idents, mods, cameras, np.concatenate(feats), meta)


def standard_benchmark(seed=42):
    """The 32-identity desk benchmark used throughout the tests."""
    return generate(SynthSpec(seed=seed))


def split(dataset, train_fraction=0.75, seed=0):
    """Identity-disjoint ``(train, test)`` split."""
    idents = np.array(dataset.identity_set())
    if len(idents) < 2:
        raise ValueError("need at least two identities to split")
    n_train = int(round(train_fraction * len(idents)))
    if not 1 <= n_train <= len(idents) - 1:
        raise ValueError(f"train_fraction {train_fraction} leaves one side empty")
    perm = np.random.default_rng(seed).permutation(idents)
    train_ids = np.sort(perm[:n_train])
    in_train = np.isin(dataset.identities, train_ids)
    train, test = dataset.subset(in_train), dataset.subset(~in_train)
    for ident in test.identity_set():
        present = set(test.modalities[test.identities == ident].tolist())
        if present != {VISIBLE, INFRARED}:
            raise ValueError(f"test identity {ident} lacks a modality")
    return train, test


def save(dataset, path):
    H, W, C = dataset.shape
    flat = dataset.features.reshape(len(dataset), -1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{H} {W} {C}\n")
        for k in range(len(dataset)):
            head = f"{dataset.sample_ids[k]} {dataset.identities[k]} {dataset.modalities[k]} {dataset.cameras[k]}"
            values = " ".join(format(v, ".17g") for v in flat[k])
            fh.write(f"{head} {values}\n")


def load(path):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise DatasetFormatError(f"{path}: line 1: missing 'H W C' header")
    try:
        H, W, C = (int(t) for t in lines[0].split())
    except ValueError:
        raise DatasetFormatError(f"{path}: line 1: header must be three integers 'H W C'") from None
    n_values = H * W * C
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 4 + n_values:
            raise DatasetFormatError(
                f"{path}: line {lineno}: expected {4 + n_values} fields for shape {H}x{W}x{C}, got {len(tokens)}"
            )
        try:
            head = [int(t) for t in tokens[:4]]
            values = [float(t) for t in tokens[4:]]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from None
        if head[2] not in (VISIBLE, INFRARED):
            raise DatasetFormatError(f"{path}: line {lineno}: modality must be 1 or 2")
        rows.append((head, values))
    if not rows:
        raise DatasetFormatError(f"{path}: no samples after header")
    heads = np.array([r[0] for r in rows], dtype=np.int64)
    feats = np.array([r[1] for r in rows], dtype=np.float64).reshape(len(rows), H, W, C)
    return Dataset(heads[:, 0], heads[:, 1], heads[:, 2], heads[:, 3], feats)
