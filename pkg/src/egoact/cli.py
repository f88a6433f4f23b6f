"""Command-line pipeline driver.

Subcommands: synth, extract, codebook, encode, train, evaluate, inspect.
Every stage takes its seed from an explicit flag (default 0), writes
outputs atomically, and is byte-identical across reruns with the same
inputs and seed. Exit codes: 0 success, 1 validation or configuration
error, 2 I/O or file-format error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bow, dataio
from .config import RunConfig
from .descriptors import CUBOID_TYPE, HOF_TYPE, LOGC_TYPE
from .errors import ConfigError, ConvergenceError, FormatError, ValidationError
from .evaluation import METHODS, extract_dataset_descriptors, run_experiment
from .modelio import train_model, write_model
from .synth import generate_synthetic_dataset

DESCRIPTOR_SIDECAR = "descriptors.json"


def _load_config(path) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig()


def _parse_features(text):
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    if not names:
        raise ConfigError("empty --features list")
    return names


METHOD_CHOICES = ["single", *METHODS]


def _resolve_method(name: str) -> str:
    return "single_kernel" if name == "single" else name


def _progress(stream):
    def report(done, total):
        print(f"progress: {done}/{total}", file=stream)
    return report


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    synth_cfg = cfg.replace_section("synth", seed=args.seed).synth
    manifest = generate_synthetic_dataset(synth_cfg, args.out)
    print(f"wrote {len(manifest.videos)} videos in {len(manifest.classes)} classes to {args.out}")
    return 0


def _load_manifest_dir(data_dir):
    return dataio.read_manifest(Path(data_dir) / "manifest.json")


def cmd_extract(args) -> int:
    cfg = _load_config(args.config)
    features = _parse_features(args.features) if args.features else cfg.features
    manifest = _load_manifest_dir(args.data)
    cache = extract_dataset_descriptors(
        manifest, args.data, features, cfg, workers=args.workers,
        progress=_progress(sys.stderr) if args.workers == 1 else None,
    )
    out_dir = Path(args.out)
    listing = {}
    for entry in manifest.videos:
        listing[entry.video_id] = {}
        for dtype, dset in cache[entry.video_id].items():
            name = f"{entry.video_id}.{dtype}.dsc"
            dataio.write_descriptor_set(dset, out_dir / name)
            listing[entry.video_id][dtype] = name
    dims = {dtype: cache[manifest.videos[0].video_id][dtype].dim for dtype in
            cache[manifest.videos[0].video_id]}
    dataio.write_json(out_dir / DESCRIPTOR_SIDECAR, {
        "kind": "descriptors",
        "features": list(features),
        "dims": dims,
        "videos": listing,
    })
    print(f"extracted {sorted(dims)} descriptors for {len(manifest.videos)} videos to {out_dir}")
    return 0


def _read_descriptor_dir(desc_dir):
    desc_dir = Path(desc_dir)
    doc = dataio.read_json(desc_dir / DESCRIPTOR_SIDECAR)
    features = [str(f) for f in doc["features"]]
    cache = {}
    for vid, files in doc["videos"].items():
        cache[vid] = {
            dtype: dataio.read_descriptor_set(desc_dir / name, descriptor_type=dtype)
            for dtype, name in files.items()
        }
    return features, cache


def cmd_codebook(args) -> int:
    _, cache = _read_descriptor_dir(args.descriptors)
    pools = [sets[args.type].vectors for sets in cache.values()
             if args.type in sets and sets[args.type].count]
    if not pools:
        raise ValidationError(f"no descriptors of type {args.type!r} found")
    pooled = np.vstack(pools)
    codebook = bow.kmeans(pooled, args.words, args.seed)
    codebook.descriptor_type = args.type
    dataio.write_codebook(codebook, args.out)
    print(f"codebook: {args.type}, {codebook.word_count} words of dim {codebook.dim}")
    return 0


def cmd_encode(args) -> int:
    features, cache = _read_descriptor_dir(args.descriptors)
    cb_dir = Path(args.codebooks)
    codebooks = {}
    for dtype in features:
        path = cb_dir / f"{dtype}.cbk"
        if not path.exists():
            raise ConfigError(f"missing codebook {path} for descriptor type {dtype!r}")
        codebooks[dtype] = dataio.read_codebook(path, descriptor_type=dtype)
    histograms = [bow.encode_video(vid, sets, codebooks) for vid, sets in cache.items()]
    dataio.write_histograms(histograms, args.out)
    print(f"encoded {len(histograms)} videos -> {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    manifest = dataio.read_manifest(args.manifest)
    histograms = dataio.read_histograms(args.histograms)
    model = train_model(manifest, histograms, cfg, _resolve_method(args.method),
                        kernel_kind=args.kernel, seed=args.seed)
    write_model(model, args.out)
    print(f"trained {_resolve_method(args.method)} model over {len(model.classes)} classes -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    manifest = _load_manifest_dir(args.data)
    features = _parse_features(args.features) if args.features else None
    report = run_experiment(
        manifest, args.data, cfg, _resolve_method(args.method),
        kernel_kind=args.kernel, features=features, repeats=args.repeats,
        base_seed=args.seed, workers=args.workers,
        progress=_progress(sys.stderr) if args.workers == 1 else None,
    )
    report.write(args.out)
    if args.csv:
        report.write_confusion_csv(args.csv)
    print(f"{_resolve_method(args.method)}: mean accuracy {report.mean_accuracy:.2f}% "
          f"over {report.split.repeats} repeats -> {args.out}")
    return 0


def _inspect_json(path, doc) -> None:
    kind = doc.get("kind", "?")
    if kind == "dataset_manifest":
        counts = {}
        for v in doc["videos"]:
            counts[v["class_index"]] = counts.get(v["class_index"], 0) + 1
        print(f"manifest: {len(doc['classes'])} classes, {len(doc['videos'])} videos")
        for k, name in enumerate(doc["classes"]):
            print(f"  [{k}] {name}: {counts.get(k, 0)} videos")
    elif kind == "histograms":
        sizes = dict(zip(doc["block_order"], doc["block_sizes"]))
        print(f"histograms: {len(doc['histograms'])} videos, blocks {sizes}")
    elif kind == "model":
        print(f"model: method={doc['method']}, classes={doc['classes']}")
        print(f"  kernels: {[s.get('label') or s['kind'] for s in doc['specs']]}")
        for name, payload in zip(doc["classes"], doc["binary_models"]):
            if doc["method"] == "simple_mkl":
                weights = payload["weights"]
                text = " ".join(f"{w:.3f}" for w in weights)
                print(f"  class {name}: kernel weights [{text}] sum={sum(weights):.3f}")
            elif doc["method"] == "boost_mkl":
                trials = payload["trials"]
                pairs = ", ".join(f"k{t['kernel_index']}:w={t['weight']:.3f}" for t in trials)
                print(f"  class {name}: {len(trials)} trials ({pairs})")
            else:
                n_sv = sum(1 for a in payload["alpha"] if a > 0)
                print(f"  class {name}: {n_sv} support vectors, bias {payload['bias']:.4f}")
    elif kind == "eval_report":
        print(f"report: method={doc['method']} kernel={doc['kernel']} "
              f"features={doc['features']}")
        print(f"  mean accuracy {doc['mean_accuracy']:.2f}% over "
              f"{len(doc['per_repeat_accuracy'])} repeats; "
              f"per-class stddev {doc['per_class_stddev']:.2f}")
        print("  confusion (% rows):")
        for name, row in zip(doc["classes"], doc["confusion"]):
            print(f"    {name}: " + " ".join(f"{v:5.1f}" for v in row))
    elif kind == "descriptors":
        print(f"descriptors: {len(doc['videos'])} videos, dims {doc['dims']}")
    else:
        print(json.dumps(doc, indent=2))


def cmd_inspect(args) -> int:
    path = Path(args.file)
    with open(path, "rb") as handle:
        magic = handle.read(4)
    if magic == dataio.FSQ_MAGIC:
        seq = dataio.read_frame_sequence(path)
        print(f"frame sequence: {seq.width}x{seq.height}, {seq.frame_count} frames")
    elif magic == dataio.DSC_MAGIC:
        dset = dataio.read_descriptor_set(path)
        print(f"descriptor set: {dset.count} vectors of dim {dset.dim}")
    elif magic == dataio.CBK_MAGIC:
        codebook = dataio.read_codebook(path)
        print(f"codebook: {codebook.word_count} words of dim {codebook.dim}")
    else:
        _inspect_json(path, dataio.read_json(path))
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egoact",
        description="First-person activity recognition pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True, seed=True):
        if config:
            p.add_argument("--config", help="JSON run configuration")
        if seed:
            p.add_argument("--seed", type=int, default=0, help="deterministic seed (default 0)")

    p = sub.add_parser("synth", help="generate the synthetic dataset")
    add_common(p)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract descriptors for a dataset")
    add_common(p, seed=False)
    p.add_argument("--data", required=True, help="dataset directory with manifest.json")
    p.add_argument("--features", help="comma list from hof,logc,cuboid")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output descriptor directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("codebook", help="train one k-means codebook")
    add_common(p, config=False)
    p.add_argument("--descriptors", required=True, help="directory from `extract`")
    p.add_argument("--type", required=True, choices=[HOF_TYPE, LOGC_TYPE, CUBOID_TYPE])
    p.add_argument("--words", type=int, default=bow.DEFAULT_WORDS)
    p.add_argument("--out", required=True, help="output .cbk path")
    p.set_defaults(func=cmd_codebook)

    p = sub.add_parser("encode", help="encode descriptor sets into histograms")
    p.add_argument("--descriptors", required=True, help="directory from `extract`")
    p.add_argument("--codebooks", required=True, help="directory holding <type>.cbk files")
    p.add_argument("--out", required=True, help="output histograms JSON path")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train a model on all listed videos")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--histograms", required=True)
    p.add_argument("--method", required=True, choices=METHOD_CHOICES)
    p.add_argument("--kernel", choices=["gaussian", "h_int", "dc_int", "jpl_int"])
    p.add_argument("--out", required=True, help="output model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the repeated-split evaluation protocol")
    add_common(p)
    p.add_argument("--data", required=True, help="dataset directory with manifest.json")
    p.add_argument("--method", required=True, choices=METHOD_CHOICES)
    p.add_argument("--kernel", choices=["gaussian", "h_int", "dc_int", "jpl_int"])
    p.add_argument("--features", help="comma list from hof,logc,cuboid")
    p.add_argument("--repeats", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output report JSON path")
    p.add_argument("--csv", help="optional confusion-matrix CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect", help="pretty-print any pipeline artifact")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
