import numpy as np
import pytest
from scipy.spatial.distance import cdist

from ensemble_reduction.clustering import (
    DbscanParams,
    Labeling,
    cluster_oip_spread,
    compare_labelings,
    dbscan,
    equi_width_histogram,
    neighbour_counts,
)
from ensemble_reduction.contingency import NOISE
from ensemble_reduction.metric import WeightedEuclidean, as_metric


def naive_dbscan(X, eps, min_samples):
    """Full distance matrix, core components by union-find, border -> lowest adjacent cluster."""
    D = cdist(X, X)
    adj = D <= eps
    core = adj.sum(axis=1) >= min_samples
    parent = list(range(len(X)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in np.flatnonzero(core):
        for j in np.flatnonzero(adj[i] & core):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    labels = np.full(len(X), NOISE)
    ids = {}
    for i in np.flatnonzero(core):
        root = find(i)
        if root not in ids:
            ids[root] = len(ids)
        labels[i] = ids[root]
    for i in np.flatnonzero(~core):
        near = [labels[j] for j in np.flatnonzero(adj[i] & core)]
        if near:
            labels[i] = min(near)
    return labels


def test_dbscan_matches_naive_reference_on_random_instances():
    for k in range(20):
        rng = np.random.default_rng(k)
        dim = 2 if k % 2 == 0 else 132
        n = int(rng.integers(20, 301))
        centers = rng.normal(scale=4.0, size=(4, dim))
        X = centers[rng.integers(0, 4, size=n)] + rng.normal(scale=0.5, size=(n, dim))
        eps = 0.8 if dim == 2 else 7.5
        ms = int(rng.integers(2, 8))
        got = dbscan(X, DbscanParams(eps=eps, min_samples=ms)).assignments
        ref = naive_dbscan(X, eps, ms)
        assert np.array_equal(got == NOISE, ref == NOISE)
        assert compare_labelings(got, ref) == 1.0


def test_dbscan_two_blobs():
    rng = np.random.default_rng(3)
    a = rng.normal(scale=0.01, size=(20, 2))
    b = a + 100.0
    lab = dbscan(np.vstack([a, b]), DbscanParams(eps=0.6, min_samples=10))
    assert lab.n_clusters == 2
    assert lab.n_noise == 0
    assert np.array_equal(lab.assignments, [0] * 20 + [1] * 20)


def test_dbscan_isolated_points_are_noise():
    X = np.arange(5, dtype=float)[:, None] * 10
    lab = dbscan(X, DbscanParams(eps=0.6, min_samples=2))
    assert lab.n_noise == 5
    assert lab.n_clusters == 0


def test_dbscan_too_few_points_are_noise():
    X = np.zeros((4, 3))
    lab = dbscan(X, DbscanParams(eps=0.6, min_samples=10))
    assert (lab.assignments == NOISE).all()


def test_dbscan_scale_covariance():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(150, 2))
    a = dbscan(X, DbscanParams(eps=0.3, min_samples=4))
    b = dbscan(X * 8.0, DbscanParams(eps=0.3 * 8.0, min_samples=4))
    assert a.equals(b)


def test_dbscan_weighted_metric_ignores_zero_weight_block():
    rng = np.random.default_rng(5)
    X = np.zeros((40, 132))
    X[20:, :44] = 50.0  # sw block separates two groups
    X[:, 44:] = rng.normal(scale=30.0, size=(40, 88))
    metric = WeightedEuclidean.from_property_weights({"sw": 1.0, "ntg": 0.0, "phi": 0.0})
    lab = dbscan(X, DbscanParams(eps=0.6, min_samples=10), metric)
    assert lab.n_clusters == 2
    assert np.array_equal(lab.assignments, [0] * 20 + [1] * 20)


def test_dbscan_accepts_plain_callable_metric():
    X = np.array([[0.0], [0.1], [0.2], [5.0]])
    lab = dbscan(X, DbscanParams(eps=0.15, min_samples=2), lambda a, b: float(abs(a[0] - b[0])))
    assert list(lab.assignments) == [0, 0, 0, NOISE]


def test_histogram_endpoints():
    h = equi_width_histogram([0.0, 1.0], 2)
    assert list(h.labeling.assignments) == [0, 1]


def test_histogram_boundary_goes_to_upper_bin():
    h = equi_width_histogram([0.0, 0.49, 0.5, 1.0], 2)
    assert list(h.labeling.assignments) == [0, 0, 1, 1]


def test_histogram_errors():
    with pytest.raises(ValueError):
        equi_width_histogram([], 4)
    with pytest.raises(ValueError):
        equi_width_histogram([2.0, 2.0], 4)
    assert list(equi_width_histogram([2.0, 2.0], 1).labeling.assignments) == [0, 0]


def test_histogram_partition_and_bin_ranges():
    rng = np.random.default_rng(0)
    v = rng.normal(1.6e8, 1e7, size=5000)
    h = equi_width_histogram(v, 64)
    assert h.counts().sum() == 5000
    assert np.all(np.diff(h.edges) > 0)
    assert h.edges[0] == v.min() and h.edges[-1] == v.max()
    for b in np.unique(h.bins):
        vals = v[h.bins == b]
        assert h.edges[b] <= vals.min() and vals.max() <= h.edges[b + 1]
    span = v.max() - v.min()
    spread = cluster_oip_spread(h.labeling, v)
    assert spread.mean_range <= span / 64 + 1e-9 * span


def test_histogram_labeling_is_contiguous_over_empty_bins():
    h = equi_width_histogram([0.0, 0.1, 10.0], 10)
    assert list(h.bins) == [0, 0, 9]
    assert list(h.labeling.assignments) == [0, 0, 1]


def test_spread_examples():
    oip = [1.0, 3.0, 7.0, 2.0]
    assert cluster_oip_spread([0, 0, 0, 0], oip).mean_range == 6.0
    assert cluster_oip_spread([0, 1, 2, 3], oip).mean_range == 0.0
    # size-weighted: (2 * 2 + 2 * 5) / 4
    assert cluster_oip_spread([0, 0, 1, 1], oip).mean_range == pytest.approx(3.5)
    with pytest.raises(ValueError):
        cluster_oip_spread([NOISE] * 4, oip)


def test_rand_examples():
    assert compare_labelings([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert compare_labelings([0, 0, 0, 0], [0, 1, 2, 3]) == 0.0
    assert compare_labelings([0, 0, 1, 1], [0, 1, 1, 1]) == pytest.approx(0.5)


def test_rand_symmetric_and_relabel_invariant():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 5, size=200)
    b = rng.integers(0, 4, size=200)
    assert compare_labelings(a, b) == pytest.approx(compare_labelings(b, a))
    perm = np.array([3, 0, 4, 1, 2])
    assert compare_labelings(a, perm[a]) == 1.0


def test_rand_noise_is_singleton():
    # two noise points never count as "same cluster"
    assert compare_labelings([NOISE, NOISE], [0, 0]) == 0.0
    assert compare_labelings([NOISE, NOISE], [0, 1]) == 1.0


def test_labeling_validation():
    with pytest.raises(ValueError):
        Labeling(np.array([0, 2]))
    lab = Labeling.from_codes([7, 3, 7, NOISE])
    assert list(lab.assignments) == [1, 0, 1, NOISE]
    assert lab.n_clusters == 2
    assert list(lab.cluster_sizes()) == [1, 2]


class _ShapeRecordingMetric:
    def __init__(self):
        self.shapes = []

    def pairwise(self, A, B):
        self.shapes.append((len(A), len(B)))
        return cdist(A, B)


def test_dbscan_works_in_row_blocks_on_a_dense_blob():
    X = np.random.default_rng(9).normal(scale=0.01, size=(1300, 3))
    metric = _ShapeRecordingMetric()
    lab = dbscan(X, DbscanParams(eps=1.0, min_samples=5), metric)
    assert lab.n_clusters == 1 and lab.n_noise == 0
    assert max(rows for rows, _ in metric.shapes) <= 512
    assert all(cols == 1300 for _, cols in metric.shapes)


def test_neighbour_counts_include_self():
    X = np.array([[0.0], [0.5], [3.0]])
    counts = neighbour_counts(X, 0.6, as_metric(None))
    assert list(counts) == [2, 2, 1]
