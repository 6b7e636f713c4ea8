"""Cross-modality retrieval evaluation.

Probes are every sample of ``probe_modality``; the gallery holds ``shot``
randomly drawn opposite-modality samples per identity.  Gallery entries are
ranked by squared Euclidean distance (ties by gallery index), camera
exclusion pairs drop entries per probe, and CMC / mAP are averaged over
independent gallery draws.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from hcreid.network import extract_descriptor

SINGLE_SHOT, MULTI_SHOT = 1, 10


class NoValidMatchError(ValueError):
    """A probe has no correct identity among its (filtered) gallery."""


@dataclass(frozen=True)
class EvalProtocol:
    shot: int = SINGLE_SHOT
    trials: int = 10
    probe_modality: int = 2
    exclusion_pairs: tuple = ()  # ((probe camera, excluded gallery camera), ...)
    gallery_cameras: tuple = None  # None: every camera of the gallery modality
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1 or self.shot < 1:
            raise ValueError("trials and shot must be at least 1")
        if self.probe_modality not in (1, 2):
            raise ValueError("probe_modality must be 1 or 2")
        object.__setattr__(self, "exclusion_pairs", tuple(tuple(int(c) for c in p) for p in self.exclusion_pairs))
        if self.gallery_cameras is not None:
            object.__setattr__(self, "gallery_cameras", tuple(int(c) for c in self.gallery_cameras))

    @property
    def gallery_modality(self):
        return 3 - self.probe_modality


@dataclass
class EvalReport:
    cmc: list
    map: float
    trials: list = field(default_factory=list)
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    @property
    def rank1(self):
        return self.cmc[0]

    def to_json(self, path=None):
        text = json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text


def build_gallery(test, protocol, rng):
    """Return ``(gallery_rows, probe_rows)`` as row positions into ``test``."""
    probes = np.flatnonzero(test.modalities == protocol.probe_modality)
    eligible = test.modalities == protocol.gallery_modality
    if protocol.gallery_cameras is not None:
        eligible &= np.isin(test.cameras, protocol.gallery_cameras)
    gallery = []
    for ident in test.identity_set():
        pool = np.flatnonzero(eligible & (test.identities == ident))
        if len(pool) == 0:
            raise ValueError(f"identity {ident} has no eligible gallery sample")
        gallery.append(rng.choice(pool, size=protocol.shot, replace=len(pool) < protocol.shot))
    return np.concatenate(gallery), probes


def rank_gallery(probe, gallery, exclude=None):
    """Gallery indices sorted by ascending squared distance to ``probe``.

    Entries flagged in ``exclude`` are dropped; exact ties keep index order.
    """
    probe = np.asarray(probe, dtype=np.float64)
    gallery = np.asarray(gallery, dtype=np.float64)
    if gallery.ndim != 2 or gallery.shape[1] != probe.shape[-1]:
        raise ValueError(f"descriptor dimensions differ: probe {probe.shape}, gallery {gallery.shape}")
    diff = gallery - probe
    dist = np.einsum("ij,ij->i", diff, diff)
    order = np.argsort(dist, kind="stable")
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=bool)
        order = order[~exclude[order]]
    return order


def _check_matches(matches):
    matches = [np.asarray(m, dtype=bool) for m in matches]
    for k, m in enumerate(matches):
        if not m.any():
            raise NoValidMatchError(f"probe {k} has no correct match in its gallery")
    return matches


def cmc_curve(matches, max_rank=None):
    """``cmc[k-1]`` = fraction of probes whose first correct match is at rank <= k.

    ``matches[i]`` is the boolean correctness of probe i's ranked gallery.
    The curve length defaults to the longest ranking.
    """
    matches = _check_matches(matches)
    if not matches:
        raise ValueError("no probes")
    if max_rank is None:
        max_rank = max(len(m) for m in matches)
    first = np.array([np.argmax(m) for m in matches])
    hits = np.bincount(first[first < max_rank], minlength=max_rank)[:max_rank]
    return np.cumsum(hits) / len(matches)


def average_precision(match):
    match = np.asarray(match, dtype=bool)
    positions = np.flatnonzero(match) + 1
    if len(positions) == 0:
        raise NoValidMatchError("no relevant item in ranking")
    return float(np.mean(np.arange(1, len(positions) + 1) / positions))


def mean_average_precision(matches):
    matches = _check_matches(matches)
    if not matches:
        raise ValueError("no probes")
    return float(np.mean([average_precision(m) for m in matches]))


def _excluded(protocol, probe_camera, gallery_cameras):
    mask = np.zeros(len(gallery_cameras), dtype=bool)
    for pc, gc in protocol.exclusion_pairs:
        if probe_camera == pc:
            mask |= gallery_cameras == gc
    return mask


def rankings_for_trial(desc, test, protocol, rng):
    """Correctness vectors for every probe with at least one valid match.

    Returns ``(matches, gallery_size, n_dropped)``.
    """
    gallery, probes = build_gallery(test, protocol, rng)
    g_desc, g_ids, g_cams = desc[gallery], test.identities[gallery], test.cameras[gallery]
    matches, dropped = [], 0
    for row in probes:
        order = rank_gallery(desc[row], g_desc, _excluded(protocol, test.cameras[row], g_cams))
        m = g_ids[order] == test.identities[row]
        if m.any():
            matches.append(m)
        else:
            dropped += 1
    return matches, len(gallery), dropped


def _summary(cmc, mAP):
    out = {"map": float(mAP)}
    for k in (1, 5, 10, 20):
        if k <= len(cmc):
            out[f"rank{k}"] = float(cmc[k - 1])
    return out


def evaluate_descriptors(desc, test, protocol):
    """Run the protocol on precomputed descriptors (one row per test sample)."""
    per_trial, curves = [], []
    for trial in range(protocol.trials):
        rng = np.random.default_rng([protocol.seed, trial])
        matches, g_size, dropped = rankings_for_trial(desc, test, protocol, rng)
        if not matches:
            raise NoValidMatchError(f"trial {trial}: no probe has a valid match")
        cmc = cmc_curve(matches, max_rank=g_size)
        mAP = mean_average_precision(matches)
        curves.append(cmc)
        per_trial.append({"trial": trial, "cmc": cmc.tolist(), "map": mAP, "n_probes": len(matches),
                          "n_dropped": dropped, **_summary(cmc, mAP)})
    width = min(len(c) for c in curves)
    stacked = np.stack([c[:width] for c in curves])
    maps = np.array([t["map"] for t in per_trial])
    keys = [k for k in per_trial[0] if k == "map" or k.startswith("rank")]
    mean = {k: float(np.mean([t[k] for t in per_trial])) for k in keys}
    std = {k: float(np.std([t[k] for t in per_trial])) for k in keys}
    return EvalReport(stacked.mean(axis=0).tolist(), float(maps.mean()), per_trial, mean, std)


def evaluate(params, cfg, test, protocol=EvalProtocol()):
    """Descriptors are extracted once; each trial redraws the gallery."""
    desc = extract_descriptor(params, cfg, test.features, test.modalities)
    return evaluate_descriptors(desc, test, protocol)


def project_2d(descriptors):
    """PCA to two dimensions.

    Each component is signed so that its largest-magnitude loading is
    positive.
    """
    X = np.asarray(descriptors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise ValueError("need at least 2 samples of dimension >= 2")
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    top = vt[:2].T
    lead = top[np.argmax(np.abs(top), axis=0), [0, 1]]
    top = top * np.where(lead < 0, -1.0, 1.0)
    return Xc @ top


def write_projection_csv(path, coords, test):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sample_id,identity,modality,x,y\n")
        for k in range(len(coords)):
            fh.write(
                f"{test.sample_ids[k]},{test.identities[k]},{test.modalities[k]},"
                f"{float(coords[k, 0])!r},{float(coords[k, 1])!r}\n"
            )
