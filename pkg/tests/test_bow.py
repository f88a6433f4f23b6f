import numpy as np
import pytest

from egoact.bow import encode_video, kmeans, kmeans_with_history, quantize, quantize_batch
from egoact.dataio import Codebook, DescriptorSet
from egoact.errors import ConfigError, ValidationError


def two_clouds(rng, n=60, distance=100.0, radius=1.0):
    a = rng.normal(scale=radius, size=(n, 3))
    b = rng.normal(scale=radius, size=(n, 3)) + np.array([distance, 0.0, 0.0])
    return np.vstack([a, b]), a.mean(axis=0), b.mean(axis=0)


def test_single_word_is_the_mean():
    rng = np.random.default_rng(0)
    points = rng.normal(size=(25, 4))
    codebook = kmeans(points, 1, seed=9)
    assert np.allclose(codebook.centroids[0], points.mean(axis=0), atol=1e-12)


def test_two_separated_clouds():
    rng = np.random.default_rng(1)
    points, mean_a, mean_b = two_clouds(rng)
    codebook = kmeans(points, 2, seed=4)
    found = codebook.centroids
    dist_a = np.linalg.norm(found - mean_a, axis=1).min()
    dist_b = np.linalg.norm(found - mean_b, axis=1).min()
    assert dist_a <= 0.5 and dist_b <= 0.5


def test_inertia_never_increases():
    rng = np.random.default_rng(2)
    points = rng.normal(size=(120, 5))
    _, history = kmeans_with_history(points, 8, seed=3)
    assert len(history) >= 2
    for before, after in zip(history, history[1:]):
        assert after <= before * (1 + 1e-12)


def test_kmeans_is_bit_deterministic():
    rng = np.random.default_rng(3)
    points = rng.normal(size=(50, 6))
    first = kmeans(points, 5, seed=11)
    second = kmeans(points, 5, seed=11)
    assert first.centroids.tobytes() == second.centroids.tobytes()
    different = kmeans(points, 5, seed=12)
    assert not np.array_equal(first.centroids, different.centroids)


def test_too_few_descriptors_rejected():
    with pytest.raises(ValidationError):
        kmeans(np.zeros((3, 2)), 4, seed=0)


def test_kmeans_accepts_descriptor_set():
    rng = np.random.default_rng(4)
    dset = DescriptorSet("hof", 4, rng.normal(size=(30, 4)))
    codebook = kmeans(dset, 3, seed=5)
    assert codebook.descriptor_type == "hof"
    assert codebook.word_count == 3


def test_quantize_exact_centroid():
    codebook = Codebook("hof", np.arange(20.0).reshape(5, 4))
    assert quantize(codebook.centroids[3], codebook) == 3


def test_quantize_tie_breaks_low():
    centroids = np.array([[0.0], [2.0], [5.0], [0.0], [2.0]])
    codebook = Codebook("hof", centroids)
    assert quantize(np.array([1.0]), codebook) == 0   # tie between 0 and 1
    assert quantize(np.array([2.0]), codebook) == 1   # tie between 1 and 4


def test_quantize_matches_brute_force():
    rng = np.random.default_rng(5)
    codebook = Codebook("hof", rng.normal(size=(17, 6)))
    queries = rng.normal(size=(1000, 6))
    batch = quantize_batch(queries, codebook)
    for query, got in zip(queries, batch):
        dists = [np.dot(query - c, query - c) for c in codebook.centroids]
        assert got == int(np.argmin(dists))
        assert quantize(query, codebook) == got


def test_quantize_dim_mismatch():
    codebook = Codebook("hof", np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        quantize(np.zeros(4), codebook)


def _codebooks():
    return {
        "hof": Codebook("hof", np.eye(4)),
        "cuboid": Codebook("cuboid", np.eye(3)),
    }


def test_encode_single_descriptor_is_one_hot():
    sets = {"hof": DescriptorSet("hof", 4, np.array([[0.0, 1.0, 0.05, 0.0]]))}
    hist = encode_video("v0", sets, _codebooks())
    assert hist.block_order() == ["hof"]
    assert np.array_equal(hist.blocks[0][1], np.array([0.0, 1.0, 0.0, 0.0]))


def test_encode_empty_type_gives_zero_block():
    sets = {
        "hof": DescriptorSet("hof", 4, np.array([[1.0, 0.0, 0.0, 0.0]])),
        "cuboid": DescriptorSet("cuboid", 3),
    }
    hist = encode_video("v0", sets, _codebooks())
    assert hist.block_order() == ["hof", "cuboid"]
    assert hist.blocks[0][1].sum() == pytest.approx(1.0)
    assert np.abs(hist.blocks[1][1]).max() == 0.0


def test_encode_order_invariant():
    rng = np.random.default_rng(6)
    vectors = rng.normal(size=(40, 4))
    sets = {"hof": DescriptorSet("hof", 4, vectors)}
    shuffled = {"hof": DescriptorSet("hof", 4, vectors[rng.permutation(40)])}
    first = encode_video("v", sets, _codebooks())
    second = encode_video("v", shuffled, _codebooks())
    assert np.array_equal(first.blocks[0][1], second.blocks[0][1])


def test_encode_requires_codebook():
    sets = {"logc": DescriptorSet("logc", 3, np.zeros((1, 3)))}
    with pytest.raises(ConfigError):
        encode_video("v", sets, _codebooks())


def test_block_sums_zero_or_one():
    rng = np.random.default_rng(7)
    for count in (0, 1, 7):
        sets = {"hof": DescriptorSet("hof", 4, rng.normal(size=(count, 4)))}
        hist = encode_video("v", sets, _codebooks())
        total = hist.blocks[0][1].sum()
        assert abs(total) <= 1e-12 or abs(total - 1.0) <= 1e-12


def test_empty_cluster_reseeded():
    # five identical points pin four centroids onto one spot; the reseed
    # pulls empties onto the farthest points
    points = np.array([[0.0, 0.0]] * 5 + [[10.0, 0.0], [0.0, 10.0]])
    codebook = kmeans(points, 3, seed=2)
    centroid_set = {tuple(np.round(c, 6)) for c in codebook.centroids}
    assert (0.0, 0.0) in centroid_set
    assert (10.0, 0.0) in centroid_set
    assert (0.0, 10.0) in centroid_set
