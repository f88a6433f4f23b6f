import numpy as np
import pytest

from egoact.config import RunConfig
from egoact.dataio import DatasetManifest, VideoEntry, VideoHistogram
from egoact.errors import FormatError, ValidationError
from egoact.modelio import read_model, train_model, write_model


def toy_histogram_dataset(classes=3, per_class=4, words=4, seed=0):
    """Histograms whose hof block leans toward the class's own word."""
    rng = np.random.default_rng(seed)
    entries, hists = [], []
    for k in range(classes):
        for v in range(per_class):
            vid = f"c{k}v{v}"
            entries.append(VideoEntry(vid, k, f"{vid}.fsq"))
            counts = rng.random(words) * 0.2
            counts[k] += 1.0
            counts /= counts.sum()
            cub = rng.random(3)
            hists.append(VideoHistogram(vid, [("hof", counts), ("cuboid", cub / cub.sum())]))
    manifest = DatasetManifest([f"class{k}" for k in range(classes)], entries)
    return manifest, hists


def fresh_queries(rng, n=10, dims=(4, 3)):
    blocks = [rng.random((n, d)) for d in dims]
    blocks = [b / b.sum(axis=1, keepdims=True) for b in blocks]
    return np.hstack(blocks)


@pytest.mark.parametrize("method,kernel", [
    ("single_kernel", "h_int"),
    ("single_kernel", "gaussian"),
    ("multichannel", "dc_int"),
    ("multichannel", "jpl_int"),
    ("simple_mkl", "h_int"),
    ("boost_mkl", "h_int"),
])
def test_model_round_trip_predictions(tmp_path, method, kernel):
    manifest, hists = toy_histogram_dataset()
    cfg = RunConfig(features=("hof", "cuboid"))
    model = train_model(manifest, hists, cfg, method, kernel_kind=kernel, seed=3)
    queries = fresh_queries(np.random.default_rng(17))

    path = tmp_path / "model.json"
    write_model(model, path)
    reloaded = read_model(path)

    assert np.array_equal(model.score_matrix(queries), reloaded.score_matrix(queries))
    assert np.array_equal(model.predict(queries), reloaded.predict(queries))


def test_trained_model_fits_its_training_data():
    manifest, hists = toy_histogram_dataset()
    cfg = RunConfig(features=("hof", "cuboid"))
    model = train_model(manifest, hists, cfg, "simple_mkl", seed=0)
    vectors = np.stack([h.concat() for h in hists])
    labels = np.array([v.class_index for v in manifest.videos])
    assert (model.predict(vectors) == labels).mean() >= 0.9


def test_train_rejects_missing_histograms():
    manifest, hists = toy_histogram_dataset()
    with pytest.raises(ValidationError):
        train_model(manifest, hists[:-1], RunConfig(), "single_kernel")


def test_train_single_class_rejected():
    manifest, hists = toy_histogram_dataset()
    solo = DatasetManifest(["only"], [VideoEntry(v.video_id, 0, v.path) for v in manifest.videos])
    with pytest.raises(ValidationError):
        train_model(solo, hists, RunConfig(), "single_kernel")


def test_read_model_rejects_other_files(tmp_path):
    from egoact.dataio import write_json

    path = tmp_path / "notmodel.json"
    write_json(path, {"kind": "histograms"})
    with pytest.raises(FormatError):
        read_model(path)


def test_model_file_is_self_contained(tmp_path):
    manifest, hists = toy_histogram_dataset()
    cfg = RunConfig(features=("hof", "cuboid"))
    model = train_model(manifest, hists, cfg, "boost_mkl", seed=9)
    path = tmp_path / "model.json"
    write_model(model, path)
    doc = read_model(path)
    assert doc.method == "boost_mkl"
    assert doc.classes == manifest.classes
    assert doc.train_vectors.shape[0] == len(hists)
    assert len(doc.specs) == 2  # one kernel per feature block
