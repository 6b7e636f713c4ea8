import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import numeric_grad, rel_err
from oracles import center_distance_oracle, random_batch
from hcreid.losses import (
    CenterLossState,
    HcConfig,
    LabeledFeatures,
    MissingModalityError,
    center_loss,
    cross_entropy,
    hc_loss,
    hc_loss_gradient,
    modality_centers,
    strong_constraint_gradient,
    strong_constraint_loss,
    total_loss,
)

# one class, visible {(1,0),(3,0)}, infrared {(0,0),(0,2)}
EXAMPLE = LabeledFeatures([[1.0, 0.0], [3.0, 0.0], [0.0, 0.0], [0.0, 2.0]], [0, 0, 0, 0], [1, 1, 2, 2])


# cross entropy

def test_cross_entropy_examples():
    loss, _ = cross_entropy([[0.0, 0.0]], [0])
    assert abs(loss - np.log(2.0)) <= 1e-10
    loss, grad = cross_entropy([[np.log(3.0), 0.0]], [0])
    assert abs(loss - np.log(4.0 / 3.0)) <= 1e-10
    np.testing.assert_allclose(grad, [[-0.25, 0.25]], atol=1e-10)


def test_cross_entropy_sums_over_batch():
    one, _ = cross_entropy([[0.0, 0.0]], [0])
    two, _ = cross_entropy([[0.0, 0.0], [0.0, 0.0]], [0, 1])
    assert abs(two - 2 * one) <= 1e-12


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ValueError):
        cross_entropy([[0.0, 0.0]], [2])
    with pytest.raises(ValueError):
        cross_entropy([[0.0, 0.0]], [-1])


@pytest.mark.parametrize("seed", range(10))
def test_cross_entropy_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-5, 5, size=(6, 4))
    y = rng.integers(0, 4, size=6)
    _, grad = cross_entropy(z, y)
    assert rel_err(grad, numeric_grad(lambda a: cross_entropy(a, y)[0], z.copy())) < 1e-6


# centers and HC loss

def test_modality_centers_example():
    c1, c2, m, n = modality_centers(EXAMPLE, 0)
    np.testing.assert_allclose(c1, [2.0, 0.0])
    np.testing.assert_allclose(c2, [0.0, 1.0])
    assert (m, n) == (2, 2)


def test_modality_centers_single_and_identical():
    b = LabeledFeatures([[1.0, 2.0], [3.0, 5.0]], [7, 7], [1, 2])
    c1, c2, _, _ = modality_centers(b, 7)
    np.testing.assert_array_equal(c1, [1.0, 2.0])
    np.testing.assert_array_equal(c2, [3.0, 5.0])
    same = LabeledFeatures([[1.0, 2.0], [1.0, 2.0]], [0, 0], [1, 2])
    c1, c2, _, _ = modality_centers(same, 0)
    np.testing.assert_array_equal(c1, c2)


def test_missing_modality_is_an_error():
    b = LabeledFeatures([[1.0], [2.0]], [0, 0], [1, 1])
    with pytest.raises(MissingModalityError):
        modality_centers(b, 0)
    with pytest.raises(MissingModalityError):
        hc_loss(b)


def test_hc_loss_examples():
    assert abs(hc_loss(EXAMPLE, HcConfig(margin_alpha=0.0)) - 5.0) <= 1e-10
    assert hc_loss(EXAMPLE, HcConfig(margin_alpha=6.0)) == 0.0
    cos = LabeledFeatures([[1.0, 0.0], [0.0, 1.0]], [0, 0], [1, 2])
    assert abs(hc_loss(cos, HcConfig(metric="cosine")) - 1.0) <= 1e-10
    same = LabeledFeatures([[1.0, 2.0], [1.0, 2.0]], [0, 0], [1, 2])
    assert hc_loss(same, HcConfig(metric="sqeuclidean")) == 0.0
    assert abs(hc_loss(same, HcConfig(metric="cosine"))) <= 1e-15


def test_hc_gradient_example():
    g = hc_loss_gradient(EXAMPLE, HcConfig())
    np.testing.assert_allclose(g, [[2.0, -1.0], [2.0, -1.0], [-2.0, 1.0], [-2.0, 1.0]], atol=1e-10)
    same = LabeledFeatures([[1.0, 2.0], [1.0, 2.0]], [0, 0], [1, 2])
    assert not hc_loss_gradient(same, HcConfig()).any()


def test_hc_gradient_zero_when_hinge_inactive():
    assert not hc_loss_gradient(EXAMPLE, HcConfig(margin_alpha=5.0)).any()


@pytest.mark.parametrize("metric", ["sqeuclidean", "cosine"])
@pytest.mark.parametrize("alpha", [0.0, 0.3])
def test_hc_gradient_finite_differences(metric, alpha):
    rng = np.random.default_rng([len(metric), int(10 * alpha)])
    for _ in range(30):
        b = random_batch(rng)
        cfg = HcConfig(metric=metric, margin_alpha=alpha)
        dists = [abs(d - alpha) for d in center_distance_oracle(b, metric)]
        if min(dists) < 1e-4:  # too close to the hinge kink for differencing
            continue
        num = numeric_grad(lambda x: hc_loss(b.with_features(x), cfg), b.features.copy())
        assert rel_err(hc_loss_gradient(b, cfg), num) < 1e-6


def test_hc_zero_iff_all_distances_within_margin():
    rng = np.random.default_rng(7)
    zero_cases = nonzero_cases = 0
    for _ in range(1000):
        b = random_batch(rng, n_classes=rng.integers(1, 4), scale=rng.uniform(0.01, 0.3))
        metric = ["sqeuclidean", "cosine"][rng.integers(2)]
        dists = center_distance_oracle(b, metric)
        alpha = float(rng.uniform(0.5, 1.5) * np.median(dists))
        value = hc_loss(b, HcConfig(metric=metric, margin_alpha=alpha))
        within = all(d <= alpha for d in dists)
        assert (value == 0.0) == within
        zero_cases += within
        nonzero_cases += not within
    assert zero_cases > 50 and nonzero_cases > 50


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_hc_properties(seed, s):
    rng = np.random.default_rng(seed)
    b = random_batch(rng)
    base = hc_loss(b, HcConfig())
    assert base >= 0
    assert abs(hc_loss(b.with_features(s * b.features), HcConfig()) - s * s * base) <= 1e-9 * max(1.0, s * s * base)
    perm = rng.permutation(len(b.labels))
    shuffled = LabeledFeatures(b.features[perm], b.labels[perm], b.modalities[perm])
    assert abs(hc_loss(shuffled, HcConfig()) - base) <= 1e-9 * max(1.0, base)
    for d in center_distance_oracle(b, "cosine"):
        assert -1e-12 <= d <= 2 + 1e-12
    assert strong_constraint_loss(b, 0.0) >= hc_loss(b, HcConfig()) - 1e-12


def test_hc_gradient_cancels_within_class_for_equal_counts():
    rng = np.random.default_rng(3)
    for _ in range(50):
        b = random_batch(rng, per_mod=(3, 3))
        g = hc_loss_gradient(b, HcConfig())
        for c in b.classes():
            np.testing.assert_allclose(g[b.labels == c].sum(axis=0), 0.0, atol=1e-10)


# strong constraint

def test_strong_constraint_example():
    assert abs(strong_constraint_loss(EXAMPLE, 0.0) - 7.0) <= 1e-10
    same = LabeledFeatures([[1.0, 2.0], [3.0, 1.0]] * 2, [0] * 4, [1, 1, 2, 2])
    assert strong_constraint_loss(same, 0.0) == 0.0


def test_strong_dispatch_through_hc_config():
    assert hc_loss(EXAMPLE, HcConfig(constraint="strong")) == strong_constraint_loss(EXAMPLE, 0.0)


def test_strong_at_least_weak_on_random_batches():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        b = random_batch(rng, per_mod=(2, 5))
        alpha = float(rng.choice([0.0, 0.0, rng.uniform(0, 20)]))
        assert strong_constraint_loss(b, alpha) >= hc_loss(b, HcConfig(margin_alpha=alpha))


@pytest.mark.parametrize("seed", range(20))
def test_strong_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    b = random_batch(rng, per_mod=(2, 4))
    num = numeric_grad(lambda x: strong_constraint_loss(b.with_features(x), 0.0), b.features.copy())
    assert rel_err(strong_constraint_gradient(b, 0.0), num) < 1e-6


# center loss

def test_center_loss_example():
    state = CenterLossState({0: np.zeros(2)}, 0.3)
    loss, grad, _ = center_loss(LabeledFeatures([[3.0, 4.0]], [0], [1]), state)
    assert abs(loss - 12.5) <= 1e-10
    np.testing.assert_allclose(grad, [[3.0, 4.0]], atol=1e-10)
    # one sample: delta = (0 - x) / 2, c <- 0 - 0.3 * delta
    np.testing.assert_allclose(state.centers[0], [0.45, 0.6], atol=1e-12)


def test_center_loss_at_center_and_frozen_rate():
    state = CenterLossState({0: np.array([1.0, 2.0])}, 0.3)
    loss, grad, _ = center_loss(LabeledFeatures([[1.0, 2.0]], [0], [2]), state)
    assert loss == 0.0 and not grad.any()
    np.testing.assert_array_equal(state.centers[0], [1.0, 2.0])
    frozen = CenterLossState({0: np.zeros(2)}, 0.0)
    for _ in range(3):
        center_loss(LabeledFeatures([[3.0, 4.0]], [0], [1]), frozen)
    np.testing.assert_array_equal(frozen.centers[0], [0.0, 0.0])


def test_center_loss_missing_center():
    with pytest.raises(KeyError):
        center_loss(LabeledFeatures([[1.0]], [5], [1]), CenterLossState({0: np.zeros(1)}))


def test_center_loss_gradient_finite_differences():
    rng = np.random.default_rng(5)
    b = random_batch(rng)
    centers = {c: rng.standard_normal(4) for c in range(3)}

    def value(x):
        return center_loss(b.with_features(x), CenterLossState(centers, 0.3))[0]

    _, grad, _ = center_loss(b, CenterLossState(centers, 0.3))
    assert rel_err(grad, numeric_grad(value, b.features.copy())) < 1e-6


# joint objective

def test_total_loss():
    assert abs(total_loss(2.0, 5.0, 0.5) - 4.5) <= 1e-12
    assert total_loss(2.0, 5.0, 0.0) == 2.0
    with pytest.raises(ValueError):
        total_loss(1.0, 1.0, -0.1)


def test_config_validation():
    assert HcConfig().lam == 0.5
    with pytest.raises(ValueError):
        HcConfig(margin_alpha=-1.0)
    with pytest.raises(ValueError):
        HcConfig(metric="manhattan")
