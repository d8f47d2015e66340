import numpy as np
import pytest

from ctpoir import (
    BinaryMask3D,
    EmptyList,
    EmptyLung,
    PairedSeries,
    SingleClass,
    ZeroGroundTruth,
    ZeroVariance,
    dice,
    mape,
    mean_dice,
    pearson,
    poir,
    roc_auc,
)

from conftest import (
    dice_oracle,
    mann_whitney_auc_oracle,
    mape_oracle,
    mask_from_voxels,
    pearson_oracle,
    random_mask,
)


def test_dice_identity_disjoint_enumerated():
    a = mask_from_voxels([(0, 0, 0), (1, 0, 0)], dims=(4, 1, 1))
    b = mask_from_voxels([(2, 0, 0), (3, 0, 0)], dims=(4, 1, 1))
    assert dice(a, a) == 1.0
    assert dice(a, b) == 0.0


def test_dice_counts():
    a = mask_from_voxels([(0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0)], dims=(8, 1, 1))
    b = mask_from_voxels([(1, 0, 0), (2, 0, 0), (3, 0, 0), (4, 0, 0), (5, 0, 0), (6, 0, 0)],
                         dims=(8, 1, 1))
    assert dice(a, b) == pytest.approx(0.6, abs=0)    # 2*3 / (4+6)


def test_dice_both_empty_one_empty():
    empty = mask_from_voxels([], dims=(2, 2, 2))
    something = mask_from_voxels([(0, 0, 0)], dims=(2, 2, 2))
    assert dice(empty, empty) == 1.0
    assert dice(empty, something) == 0.0


def test_dice_symmetry_and_range_randomized():
    rng = np.random.default_rng(0)
    for _ in range(100):
        nx, ny, nz = (int(rng.integers(1, 9)) for _ in range(3))
        a = BinaryMask3D(rng.random((nz, ny, nx)) < 0.4, (1.0, 1.0, 1.0))
        b = BinaryMask3D(rng.random((nz, ny, nx)) < 0.4, (1.0, 1.0, 1.0))
        d = dice(a, b)
        assert d == dice(b, a)
        assert 0.0 <= d <= 1.0
        assert d == dice_oracle(a, b)


def test_mean_dice():
    a = mask_from_voxels([(0, 0, 0)], dims=(2, 1, 1))
    b = mask_from_voxels([(1, 0, 0)], dims=(2, 1, 1))
    assert mean_dice([(a, a)]) == 1.0
    assert mean_dice([(a, a), (a, b)]) == 0.5
    with pytest.raises(EmptyList):
        mean_dice([])


def test_poir_cases():
    lung = mask_from_voxels([(x, y, z) for x in range(5) for y in range(5) for z in range(8)],
                            dims=(5, 5, 8), spacing=(0.7, 0.7, 5.0))
    infected = mask_from_voxels([(x, y, z) for x in range(5) for y in range(5) for z in range(2)],
                                dims=(5, 5, 8), spacing=(0.7, 0.7, 5.0))
    assert poir(infected, lung) == pytest.approx(0.25, rel=1e-12)
    empty = mask_from_voxels([], dims=(5, 5, 8), spacing=(0.7, 0.7, 5.0))
    assert poir(empty, lung) == 0.0
    with pytest.raises(EmptyLung):
        poir(empty, empty)


def test_poir_scale_invariance():
    rng = np.random.default_rng(1)
    a = random_mask(rng, spacing=(1.0, 1.0, 1.0))
    lung = BinaryMask3D(np.ones_like(a.bits), a.spacing)
    doubled = BinaryMask3D(a.bits, (2.0, 2.0, 2.0))
    lung2 = BinaryMask3D(lung.bits, (2.0, 2.0, 2.0))
    assert poir(a, lung) == pytest.approx(poir(doubled, lung2), rel=1e-12)


def test_pearson_exact_lines():
    up = PairedSeries(np.array([1.0, 2.0, 3.0]), np.array([2.0, 4.0, 6.0]))
    down = PairedSeries(np.array([1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0]))
    assert pearson(up) == pytest.approx(1.0, abs=1e-15)
    assert pearson(down) == pytest.approx(-1.0, abs=1e-15)


def test_pearson_zero_variance():
    with pytest.raises(ZeroVariance):
        pearson(PairedSeries(np.array([1.0, 1.0, 1.0]), np.array([1.0, 2.0, 3.0])))


def test_pearson_matches_formula_oracle():
    rng = np.random.default_rng(2)
    for _ in range(50):
        xs = rng.normal(size=50)
        ys = 0.3 * xs + rng.normal(size=50)
        r = pearson(PairedSeries(xs, ys))
        assert r == pytest.approx(pearson_oracle(xs.tolist(), ys.tolist()), abs=1e-12)
        assert -1.0 - 1e-12 <= r <= 1.0 + 1e-12


def test_pearson_affine_invariance():
    rng = np.random.default_rng(3)
    xs = rng.normal(size=40)
    ys = rng.normal(size=40)
    base = pearson(PairedSeries(xs, ys))
    assert pearson(PairedSeries(2.5 * xs + 7.0, ys)) == pytest.approx(base, abs=1e-12)
    assert pearson(PairedSeries(-2.5 * xs + 7.0, ys)) == pytest.approx(-base, abs=1e-12)


def test_mape_cases():
    assert mape(PairedSeries(np.array([0.22]), np.array([0.20]))) == pytest.approx(10.0, rel=1e-12)
    same = np.array([0.5, 0.25, 0.125])
    assert mape(PairedSeries(same, same)) == 0.0
    with pytest.raises(ZeroGroundTruth) as err:
        mape(PairedSeries(np.array([1.0, 1.0]), np.array([2.0, 0.0])))
    assert err.value.index == 1


def test_mape_matches_oracle():
    rng = np.random.default_rng(4)
    preds = rng.uniform(0.01, 0.5, size=30)
    gts = rng.uniform(0.01, 0.5, size=30)
    assert mape(PairedSeries(preds, gts)) == pytest.approx(
        mape_oracle(preds.tolist(), gts.tolist()), abs=1e-12)


def test_auc_perfect_separation():
    curve = roc_auc([0.9, 0.8, 0.2, 0.1], [True, True, False, False])
    assert curve.auc == 1.0


def test_auc_all_ties_is_half():
    curve = roc_auc([0.5, 0.5, 0.5, 0.5], [True, False, True, False])
    assert curve.auc == pytest.approx(0.5, abs=0)


def test_auc_single_class_rejected():
    with pytest.raises(SingleClass):
        roc_auc([0.1, 0.2], [True, True])


def test_curve_endpoints_and_monotonicity():
    rng = np.random.default_rng(5)
    scores = rng.random(60)
    labels = rng.random(60) < 0.4
    labels[0], labels[1] = True, False
    curve = roc_auc(scores, labels)
    assert curve.points[0] == (0.0, 0.0)
    assert curve.points[-1] == (1.0, 1.0)
    fprs = [p[0] for p in curve.points]
    tprs = [p[1] for p in curve.points]
    assert all(a <= b for a, b in zip(fprs, fprs[1:]))
    assert all(a <= b for a, b in zip(tprs, tprs[1:]))


def test_auc_matches_mann_whitney_oracle():
    rng = np.random.default_rng(6)
    for trial in range(100):
        n = int(rng.integers(4, 40))
        # quantized scores force ties in roughly half the trials
        scores = (np.round(rng.random(n), 1) if trial % 2 else rng.random(n))
        labels = rng.random(n) < 0.5
        if labels.all() or not labels.any():
            labels[0] = ~labels[0]
        curve = roc_auc(scores, labels)
        oracle = mann_whitney_auc_oracle(scores.tolist(), labels.tolist())
        assert curve.auc == pytest.approx(oracle, abs=1e-9)
