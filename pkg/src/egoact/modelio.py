"""Trained one-vs-all models: training on full datasets, scoring new
histograms, and the JSON model file format.

The model file inlines everything prediction needs: kernel specs with
materialized parameters, per-kernel trace scales, the training histogram
vectors, and one binary payload per class (plain SVM, MKL, or boosted).
"""

from __future__ import annotations

import numpy as np

from . import boost as boost_mod
from . import kernels, mkl, svm
from .config import RunConfig
from .dataio import DatasetManifest, read_json, write_json
from .errors import ConfigError, FormatError, ValidationError
from .evaluation import METHODS, build_bank_specs, _normalize_features

_BINARY_CODECS = {
    "single_kernel": (svm.BinarySvmModel, "svm"),
    "multichannel": (svm.BinarySvmModel, "svm"),
    "simple_mkl": (mkl.MklModel, "mkl"),
    "boost_mkl": (boost_mod.BoostedModel, "boost"),
}


class TrainedModel:
    """A full multiclass model plus the data needed to score new vectors."""

    __slots__ = ("method", "classes", "specs", "scales", "train_vectors", "binary_models")

    def __init__(self, method, classes, specs, scales, train_vectors, binary_models):
        if method not in METHODS:
            raise ValidationError(f"unknown method {method!r}")
        self.method = method
        self.classes = list(classes)
        self.specs = list(specs)
        self.scales = [float(s) for s in scales]
        self.train_vectors = np.asarray(train_vectors, dtype=np.float64)
        self.binary_models = list(binary_models)

    def kernel_rows_for(self, vectors) -> np.ndarray:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        return np.stack(
            [
                kernels.kernel_rows(spec, vectors, self.train_vectors) * scale
                for spec, scale in zip(self.specs, self.scales)
            ]
        )

    def score_matrix(self, vectors) -> np.ndarray:
        rows = self.kernel_rows_for(vectors)
        columns = []
        for model in self.binary_models:
            if self.method in ("single_kernel", "multichannel"):
                columns.append(svm.decision_many(model, rows[0]))
            elif self.method == "simple_mkl":
                columns.append(mkl.mkl_predict_many(model, rows))
            else:
                columns.append(boost_mod.boost_predict_many(model, rows))
        return np.stack(columns, axis=1)

    def predict(self, vectors) -> np.ndarray:
        return svm.ova_predict_scores(self.score_matrix(vectors))

    def to_dict(self) -> dict:
        return {
            "kind": "model",
            "method": self.method,
            "classes": self.classes,
            "specs": [s.to_dict() for s in self.specs],
            "scales": self.scales,
            "train_vectors": self.train_vectors.tolist(),
            "binary_models": [m.to_dict() for m in self.binary_models],
        }

    @staticmethod
    def from_dict(doc: dict) -> "TrainedModel":
        method = doc["method"]
        if method not in _BINARY_CODECS:
            raise FormatError(f"model file has unknown method {method!r}")
        cls, _ = _BINARY_CODECS[method]
        binaries = [cls.from_dict(b) for b in doc["binary_models"]]
        specs = [kernels.KernelSpec.from_dict(s) for s in doc["specs"]]
        return TrainedModel(
            method, doc["classes"], specs, doc["scales"], doc["train_vectors"], binaries
        )


def write_model(model: TrainedModel, path) -> None:
    write_json(path, model.to_dict())


def read_model(path) -> TrainedModel:
    doc = read_json(path)
    if doc.get("kind") != "model":
        raise FormatError(f"{path}: not a model file")
    try:
        return TrainedModel.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed model file ({exc})") from exc


def train_model(manifest: DatasetManifest, histograms, cfg: RunConfig, method: str,
                kernel_kind: str | None = None, seed: int = 0) -> TrainedModel:
    """Train one model on every video in the manifest (no held-out split)."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}, expected one of {METHODS}")
    kernel_kind = kernel_kind or cfg.kernels.kind
    by_id = {h.video_id: h for h in histograms}
    missing = [v.video_id for v in manifest.videos if v.video_id not in by_id]
    if missing:
        raise ValidationError(f"histograms missing for videos: {missing[:5]}")
    hists = [by_id[v.video_id] for v in manifest.videos]
    labels = np.array([v.class_index for v in manifest.videos])

    features = _normalize_features(hists[0].block_order())
    layout = [
        (name, offset, length)
        for (name, _), (offset, length) in zip(hists[0].blocks, hists[0].layout())
    ]
    vectors = np.stack([h.concat() for h in hists])

    specs = build_bank_specs(method, kernel_kind, features, layout, cfg, vectors)
    grams, scales = [], []
    for spec in specs:
        gram, scale = kernels.trace_normalize(kernels.gram_matrix(vectors, spec))
        grams.append(gram)
        scales.append(scale)
    bank = kernels.KernelBank(specs, grams)

    if method in ("single_kernel", "multichannel"):
        def trainer(y_pm, _k):
            return svm.smo_train(bank.grams[0], y_pm, cfg.svm.c_reg, tol=cfg.svm.tol)
    elif method == "simple_mkl":
        params = mkl.MklParams(
            c_reg=cfg.svm.c_reg, svm_tol=cfg.svm.tol, weight_tol=cfg.mkl.weight_tol,
            objective_tol=cfg.mkl.objective_tol, max_outer=cfg.mkl.max_outer,
        )
        def trainer(y_pm, _k):
            return mkl.simple_mkl_train(bank, y_pm, params)
    else:
        def trainer(y_pm, k):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k,)))
            return boost_mod.boost_train(bank, y_pm, cfg.boost.trials, cfg.svm.c_reg, rng,
                                         svm_tol=cfg.svm.tol)

    ova = svm.ova_train(labels, manifest.classes, trainer)
    return TrainedModel(method, manifest.classes, specs, scales, vectors, ova.models)
