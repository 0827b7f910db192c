import numpy as np
import pytest

from permclass.classify import (LabeledDataset, ModelParams, fit, knn_predict,
                                predict, predict_finite, predict_infinite,
                                sequential_partition)
from permclass.exact import Partition, cyp_exact, ratio_exact
from permclass.kernels import Kernel, gram


def make_data(rng, n_per=(6, 5), spread=1.0):
    pts, labels = [], []
    for r, n in enumerate(n_per):
        pts.append(rng.normal(size=(n, 2)) * spread + 3.0 * r)
        labels.extend([r] * n)
    return LabeledDataset(points=np.vstack(pts), labels=np.array(labels),
                          n_classes=len(n_per))


def test_fit_structure(rng):
    data = make_data(rng, (10, 10))
    model = fit(data, ModelParams(kernel=Kernel.gaussian(1.0), alphas=1.0))
    assert model.n_classes == 2
    assert all(s.table.n == 10 for s in model.classes)


def test_empty_class_rule():
    # one observed class, one declared-but-empty: constant kernel gives
    # p(class 1) = (alpha + n) / (2 alpha + n)
    n, alpha = 4, 1.0
    data = LabeledDataset(points=np.arange(n, dtype=float).reshape(-1, 1),
                          labels=np.zeros(n, dtype=int), n_classes=2)
    model = fit(data, ModelParams(kernel=Kernel.constant(1.0), alphas=alpha))
    row = predict_finite(model, np.array([0.5]))
    assert row.probs[0] == pytest.approx((alpha + n) / (2 * alpha + n), rel=1e-12)
    assert row.argmax == 0


def test_refit_with_permuted_rows_identical(rng):
    data = make_data(rng)
    perm = rng.permutation(data.n)
    shuffled = LabeledDataset(points=data.points[perm], labels=data.labels[perm],
                              n_classes=2)
    queries = np.array([[0.0, 0.0], [1.0, 1.5], [3.0, 2.0]])
    t1 = predict(fit(data, ModelParams(kernel=Kernel.gaussian(1.0))), queries)
    t2 = predict(fit(shuffled, ModelParams(kernel=Kernel.gaussian(1.0))), queries)
    assert np.allclose(t1.probs, t2.probs, rtol=1e-12)
    assert np.array_equal(t1.argmax, t2.argmax)


def test_mirror_symmetry_gives_half():
    pts = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    data = LabeledDataset(points=pts, labels=np.array([0, 0, 1, 1]), n_classes=2)
    model = fit(data, ModelParams(kernel=Kernel.gaussian(1.0), alphas=1.0))
    row = predict_finite(model, np.array([0.0]))
    assert row.probs[0] == pytest.approx(0.5, abs=1e-12)
    assert row.argmax == 0  # tie resolves to the lowest class index


def test_posterior_rows_normalized(rng):
    data = make_data(rng)
    model = fit(data, ModelParams(kernel=Kernel.exponential(0.9), alphas=0.7))
    table = predict(model, rng.normal(size=(20, 2)) * 2 + 1.5)
    assert np.allclose(table.probs.sum(axis=1), 1.0, atol=1e-12)
    assert (table.raw > 0).all()
    assert np.array_equal(table.argmax, table.probs.argmax(axis=1))


def test_exchangeability_relabelling(rng):
    data = make_data(rng, (5, 7))
    swapped = LabeledDataset(points=data.points, labels=1 - data.labels,
                             n_classes=2)
    params = ModelParams(kernel=Kernel.gaussian(1.2), alphas=1.0)
    q = np.array([[1.0, 0.5]])
    a = predict(fit(data, params), q).probs[0]
    b = predict(fit(swapped, params), q).probs[0]
    assert np.allclose(a, b[::-1], rtol=1e-12)


def test_order_consistency_small_classes(rng):
    # with three points per class, order 3 equals the exact ratios
    data = make_data(rng, (3, 3))
    q = rng.normal(size=(4, 2)) + 1.0
    p3 = predict(fit(data, ModelParams(kernel=Kernel.gaussian(1.0), order=3)), q)
    pe = predict(fit(data, ModelParams(kernel=Kernel.gaussian(1.0),
                                       order="exact")), q)
    assert np.allclose(p3.probs, pe.probs, rtol=1e-10)


def test_order_consistency_moderate_classes(rng):
    data = make_data(rng, (8, 8))
    q = rng.normal(size=(6, 2)) + 1.5
    p3 = predict(fit(data, ModelParams(kernel=Kernel.gaussian(1.0), order=3)), q)
    pe = predict(fit(data, ModelParams(kernel=Kernel.gaussian(1.0),
                                       order="exact")), q)
    assert np.max(np.abs(p3.probs - pe.probs)) <= 0.05


def test_duplicate_query_is_allowed(rng):
    data = make_data(rng)
    model = fit(data, ModelParams(kernel=Kernel.gaussian(1.0)))
    row = predict_finite(model, data.points[0])
    assert np.isfinite(row.probs).all()


def test_alphas_validation():
    data = LabeledDataset(points=np.zeros((2, 1)), labels=np.array([0, 1]),
                          n_classes=2)
    with pytest.raises(ValueError, match="positive"):
        fit(data, ModelParams(kernel=Kernel.gaussian(1.0), alphas=(1.0, 0.0)))
    with pytest.raises(ValueError, match="per-class"):
        fit(data, ModelParams(kernel=Kernel.gaussian(1.0), alphas=(1.0,) * 3))


def test_predict_exact_matches_ratio_oracle(rng):
    data = make_data(rng, (4, 3))
    params = ModelParams(kernel=Kernel.gaussian(1.0), alphas=(0.6, 1.1),
                         order="exact")
    model = fit(data, params)
    t = rng.normal(size=2)
    row = predict_finite(model, t)
    w = np.array([ratio_exact(t, data.class_points(r), params.kernel, a)
                  for r, a in enumerate((0.6, 1.1))])
    assert np.allclose(row.raw, w, rtol=1e-12)


# -- infinite-class mode --------------------------------------------------


def test_infinite_crp_weights_constant_kernel():
    part = Partition.from_blocks([[0, 1, 2], [3]])
    params = ModelParams(kernel=Kernel.constant(1.0), lam=0.7, order="exact")
    row = predict_infinite(np.zeros((4, 1)), part, np.array([0.0]), params)
    expect = np.array([3.0, 1.0, 0.7])
    assert np.allclose(row.probs, expect / expect.sum(), atol=1e-12)
    # graded evaluation agrees
    params3 = ModelParams(kernel=Kernel.constant(1.0), lam=0.7, order=3)
    row3 = predict_infinite(np.zeros((4, 1)), part, np.array([0.0]), params3)
    assert np.allclose(row3.probs, row.probs, atol=1e-12)


def test_infinite_small_lambda_joins_block():
    part = Partition.from_blocks([[0]])
    params = ModelParams(kernel=Kernel.constant(1.0), lam=1e-12, order="exact")
    row = predict_infinite(np.zeros((1, 1)), part, np.array([0.0]), params)
    assert row.probs[0] == pytest.approx(1.0, abs=1e-11)


def test_infinite_matches_exact_cyp_ratios(rng):
    kern = Kernel.gaussian(1.0)
    pts = rng.normal(size=(3, 1))
    part = Partition.from_blocks([[0, 1], [2]])
    params = ModelParams(kernel=kern, lam=0.5, order="exact")
    t = np.array([0.2])
    row = predict_infinite(pts, part, t, params)
    weights = []
    for block in part.blocks:
        sub = pts[list(block)]
        g = gram(kern, sub)
        aug = gram(kern, np.vstack([sub, t[None, :]]))
        weights.append(cyp_exact(aug.entries) / cyp_exact(g.entries))
    weights.append(0.5 * 1.0)
    weights = np.array(weights)
    assert np.allclose(row.raw, weights, rtol=1e-10)


def test_infinite_zero_cyp_block_named():
    kern = Kernel.diagonal_indicator(default=1.0)
    pts = np.arange(2, dtype=float).reshape(-1, 1)
    part = Partition.from_blocks([[0, 1]])
    params = ModelParams(kernel=kern, lam=1.0, order="exact")
    with pytest.raises(ZeroDivisionError, match="block 0"):
        predict_infinite(pts, part, np.array([5.0]), params)


def test_sequential_single_point():
    params = ModelParams(kernel=Kernel.gaussian(1.0), lam=1.0)
    part = sequential_partition(np.zeros((1, 2)), params)
    assert part.blocks == ((0,),)


def test_sequential_two_clusters_argmax(rng):
    pts = np.vstack([rng.normal(0, 0.01, size=(5, 1)),
                     rng.normal(10, 0.01, size=(5, 1))])
    params = ModelParams(kernel=Kernel.gaussian(0.5), lam=0.5, order=3)
    part = sequential_partition(pts, params)
    assert part.block_count == 2
    assert part.sizes == (5, 5)


def test_sequential_sampling_reproducible():
    params = ModelParams(kernel=Kernel.constant(1.0), lam=1.0, order="exact")
    pts = np.zeros((6, 1))
    a = sequential_partition(pts, params, rule="sample", seed=42)
    b = sequential_partition(pts, params, rule="sample", seed=42)
    assert a.blocks == b.blocks
    seen = {sequential_partition(pts, params, rule="sample", seed=s).blocks
            for s in range(30)}
    assert len(seen) > 1  # sampling really samples


def test_sequential_bad_rule():
    params = ModelParams(kernel=Kernel.constant(1.0), lam=1.0)
    with pytest.raises(ValueError, match="rule"):
        sequential_partition(np.zeros((2, 1)), params, rule="best")


# -- kNN baseline ---------------------------------------------------------


def test_knn_majority_and_ties():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [1.0, 1.0]])
    y = np.array([0, 0, 1])
    assert knn_predict(X, y, np.array([[0.05, 0.0]]), k=3)[0] == 0
    # 1-vs-1 vote among k=2 resolves to the lowest class code
    assert knn_predict(X, y, np.array([[0.6, 0.55]]), k=2)[0] == 0


def test_knn_self_classification(rng):
    data = make_data(rng, (8, 8), spread=0.3)
    pred = knn_predict(data.points, data.labels, data.points, k=1)
    assert np.array_equal(pred, data.labels)


def test_all_zero_class_weights_is_an_error():
    # a ground-set point with zero self-similarity and no overlap with the
    # training block leaves every class weight at zero
    ground = [(0.0,), (1.0,), (2.0,)]
    P = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 0.0]])
    kern = Kernel.projection(P, ground)
    data = LabeledDataset(points=np.array(ground[:2]),
                          labels=np.array([0, 0]), n_classes=1)
    model = fit(data, ModelParams(kernel=kern, alphas=1.0, order="exact"))
    with pytest.raises(ValueError, match="degenerate kernel"):
        predict_finite(model, np.array([2.0]))


def test_fit_on_empty_dataset_uses_empty_class_rule():
    data = LabeledDataset(points=np.zeros((0, 1)),
                          labels=np.zeros(0, dtype=int), n_classes=2)
    model = fit(data, ModelParams(kernel=Kernel.constant(1.0),
                                  alphas=(1.0, 3.0)))
    row = predict_finite(model, np.array([0.0]))
    assert np.allclose(row.probs, [0.25, 0.75], atol=1e-12)
