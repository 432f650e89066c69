"""Command-line entry points: extract, label, train, eval, analyze, serve.

Every run resolves its options as defaults < flags < config file, echoes a
provenance record (config hash, seed, toolkit version) into its outputs,
and exits 0 on success, 1 on usage errors, 2 on data errors, 3 on internal
errors.
"""

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__, nn
from .analysis import pea_map, qp_report, sequence_intensity, write_pgm
from .annotation import load_session, masks_for_frame
from .dataset_store import DatasetStore
from .errors import FileMissing, PeaKitError, UndefinedDenominator
from .patch_pipeline import (
    Source,
    label_spatial,
    label_temporal,
    record_for_window,
    sample_negatives,
    split,
)
from .pea_models import (
    PeaClassifier,
    classifier_counts,
    load_task,
    train_classifier,
)
from .pea_types import TEMPORAL_SPAN, PeaType
from .video_io import load_sidecar, open_sequence, parse_sequence_filename, yuv420_to_rgb

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _provenance(command: str, options: Dict) -> Dict:
    clean = {k: v for k, v in sorted(options.items()) if k not in ("config", "func")}
    blob = json.dumps(clean, sort_keys=True, default=str)
    return {
        "command": command,
        "config_hash": hashlib.sha256(blob.encode("utf-8")).hexdigest(),
        "seed": options.get("seed"),
        "version": __version__,
    }


def _write_provenance(target: Path, prov: Dict) -> None:
    Path(str(target) + ".provenance.json").write_text(
        json.dumps(prov, sort_keys=True) + "\n", "utf-8"
    )


def _provenance_comment(prov: Dict) -> str:
    return (f"# provenance command={prov['command']} config_hash={prov['config_hash']} "
            f"seed={prov['seed']} version={prov['version']}")


def _data_dir(value: Optional[str]) -> Path:
    return Path(value or os.environ.get("PEA_DATA_DIR", "."))


def _derived_seed(base: int, *parts: str) -> int:
    digest = hashlib.sha256(":".join([str(base), *parts]).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def _scan_sequences(directory: Path) -> Dict[str, Path]:
    table = {}
    for path in sorted(directory.glob("*.yuv")):
        meta = load_sidecar(path) or parse_sequence_filename(path)
        if meta is not None:
            table[meta.name] = path
    return table


# -- extract ------------------------------------------------------------------


def cmd_extract(opts) -> int:
    reader = open_sequence(opts["sequence"])
    out_dir = Path(opts["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    first, last = opts["first_frame"], opts["last_frame"]
    if last is None or last > reader.frame_count:
        last = reader.frame_count
    for i in range(first, last):
        frame = reader.read_frame(i)
        if opts["image_format"] == "pgm":
            write_pgm(frame.y, out_dir / f"frame_{i:05d}.pgm")
        else:
            from PIL import Image

            Image.fromarray(yuv420_to_rgb(frame), mode="RGB").save(
                out_dir / f"frame_{i:05d}.png"
            )
    prov = _provenance("extract", opts)
    _write_provenance(out_dir / "frames", prov)
    print(f"extracted frames [{first}, {last}) of {reader.meta.name} to {out_dir}")
    return EXIT_OK


# -- label --------------------------------------------------------------------


def _label_sequence(store, annotations, seq_name, seq_path, registry, opts) -> Dict:
    """Label one compressed sequence; returns per-source counters."""
    counters = {"positive": 0, "compressed_negative": 0, "reference_negative": 0}
    compressed = open_sequence(seq_path)
    meta = compressed.meta
    if meta.qp is None:
        raise PeaKitError(
            f"sequence {seq_name!r} has no qp in its metadata; annotate the "
            "compressed variant, not the reference"
        )
    reference = None
    if meta.reference and meta.reference in registry:
        reference = open_sequence(registry[meta.reference])
    seq_anns = [a for a in annotations if a.sequence == seq_name]
    for pea_type in PeaType:
        type_anns = [a for a in seq_anns if a.pea_type == pea_type]
        if not type_anns:
            continue
        size = pea_type.window_size
        stride = opts["stride"] or size
        windows = []
        if pea_type.is_temporal:
            starts = sorted({a.frame for a in type_anns})
            starts = [s for s in starts if s + TEMPORAL_SPAN <= compressed.frame_count]
            for start in starts:
                masks = [
                    masks_for_frame(type_anns, seq_name, start + i, pea_type,
                                    meta.width, meta.height, opts["min_votes"])
                    for i in range(TEMPORAL_SPAN)
                ]
                windows.extend(label_temporal(masks, size, stride,
                                              pea_type=pea_type, start_frame=start))
            frame_indices = starts
        else:
            frames = sorted({a.frame for a in type_anns})
            for frame in frames:
                mask = masks_for_frame(type_anns, seq_name, frame, pea_type,
                                       meta.width, meta.height, opts["min_votes"])
                windows.extend(label_spatial(mask, size, stride,
                                             pea_type=pea_type, frame=frame))
            frame_indices = frames
        compressed_negs = [w for w in windows if w.source is Source.COMPRESSED_UNCIRCLED]
        reference_negs = []
        if reference is not None and compressed_negs:
            reference_negs = sample_negatives(
                compressed_negs,
                width=meta.width, height=meta.height,
                frame_indices=frame_indices,
                seed=_derived_seed(opts["seed"], seq_name, pea_type.wire_name),
                ratio=opts["ratio"],
            )
        for window in windows + reference_negs:
            record = record_for_window(window, compressed, reference, meta.qp, seq_name)
            store.append(record)
            if window.label == 1:
                counters["positive"] += 1
            elif window.source is Source.REFERENCE:
                counters["reference_negative"] += 1
            else:
                counters["compressed_negative"] += 1
    return counters


def cmd_label(opts) -> int:
    annotations = load_session(opts["annotations"])
    sequences_dir = _data_dir(opts["sequences"])
    registry = _scan_sequences(sequences_dir)
    store_path = Path(opts["out_store"])
    store_path.parent.mkdir(parents=True, exist_ok=True)
    prov = _provenance("label", opts)

    with DatasetStore(store_path) as store:
        if not annotations:
            print("warning: annotation file is empty; store left empty", file=sys.stderr)
        else:
            for seq_name in sorted({a.sequence for a in annotations}):
                if seq_name not in registry:
                    raise FileMissing(
                        f"annotated sequence {seq_name!r} not found under {sequences_dir}"
                    )
                counters = _label_sequence(store, annotations, seq_name,
                                           registry[seq_name], registry, opts)
                print(f"{seq_name}: {counters['positive']} positive, "
                      f"{counters['compressed_negative']} compressed negative, "
                      f"{counters['reference_negative']} reference negative")
            assignment: Dict[str, str] = {}
            rows = store.manifest_rows()
            for pea_type in PeaType:
                type_rows = [r for r in rows if r.pea_type == pea_type]
                if len(type_rows) < 4:
                    continue
                ids = [(f"{r.sequence}:{r.frame}:{r.x}:{r.y}:"
                        f"{r.pea_type.wire_name}:{r.label}:{r.qp}", r.label)
                       for r in type_rows]
                assignment.update(split(ids, seed=opts["seed"],
                                        train_fraction=opts["train_fraction"]).assignment)
            if assignment:
                store.assign_splits(assignment)
        stats = store.stats()
    for (pea_type, label), count in sorted(stats.items()):
        print(f"  {pea_type.wire_name} label={label}: {count}")
    _write_provenance(store_path, prov)
    return EXIT_OK


# -- train / eval -------------------------------------------------------------


def _train_config(opts) -> nn.TrainConfig:
    drops = tuple(int(e) for e in opts["lr_drops"].split(",") if e) \
        if opts["lr_drops"] else ()
    return nn.TrainConfig(
        batch_size=opts["batch_size"],
        momentum=opts["momentum"],
        weight_decay=opts["weight_decay"],
        initial_lr=opts["lr"],
        lr_drop_epochs=drops,
        epochs=opts["epochs"],
        seed=opts["seed"],
        paper_mode=opts["paper_mode"],
    )


def cmd_train(opts) -> int:
    pea_type = PeaType.from_wire(opts["pea_type"])
    prov = _provenance("train", opts)
    with DatasetStore(opts["store"], mode="r") as store:
        data = load_task(store, pea_type)
    if opts["augment"] == "on":
        from .patch_pipeline import AugmentConfig

        augment = AugmentConfig()
    else:
        augment = "auto" if opts["augment"] == "auto" else None
    classifier, logs = train_classifier(
        data, pea_type, architecture=opts["arch"],
        train_cfg=_train_config(opts), augment=augment, provenance=prov,
    )
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    classifier.save(out)
    _write_provenance(out, prov)
    if opts["log"]:
        log_path = Path(opts["log"])
        lines = [_provenance_comment(prov), "epoch,lr,train_loss,train_acc,test_acc"]
        for row in logs:
            lines.append(f"{row.epoch},{row.lr!r},{row.train_loss!r},"
                         f"{row.train_acc!r},{row.test_acc!r}")
        log_path.write_text("\n".join(lines) + "\n", "utf-8")
    final_test = _accuracy_string(classifier, data.test)
    final_train = _accuracy_string(classifier, data.train)
    print(f"{pea_type.wire_name} [{opts['arch']}] train accuracy {final_train}, "
          f"test accuracy {final_test}; checkpoint at {out}")
    return EXIT_OK


def _accuracy_string(classifier, arrays) -> str:
    if len(arrays) == 0:
        return "n/a (empty split)"
    counts = classifier_counts(classifier, arrays)
    try:
        return f"{nn.accuracy(counts):.4f}"
    except UndefinedDenominator:
        return f"undefined ({counts})"


def cmd_eval(opts) -> int:
    classifier = PeaClassifier.load(opts["checkpoint"])
    with DatasetStore(opts["store"], mode="r") as store:
        data = load_task(store, classifier.pea_type)
    arrays = data.test if opts["split"] == "test" else data.train
    if len(arrays) == 0:
        raise PeaKitError(f"{opts['split']} split holds no "
                          f"{classifier.pea_type.wire_name} records")
    counts = classifier_counts(classifier, arrays)
    print(f"pea_type: {classifier.pea_type.wire_name}")
    print(f"architecture: {classifier.architecture}")
    print(f"split: {opts['split']} ({counts.total} samples)")
    print(f"tp={counts.tp} fp={counts.fp} tn={counts.tn} fn={counts.fn}")
    try:
        print(f"accuracy: {nn.accuracy(counts):.4f}")
    except UndefinedDenominator as e:
        print(f"accuracy: undefined ({e})")
    try:
        print(f"balanced_accuracy: {nn.balanced_accuracy(counts):.4f}")
    except UndefinedDenominator as e:
        print(f"balanced_accuracy: undefined ({e})")
    return EXIT_OK


# -- analyze ------------------------------------------------------------------


def _load_bank(directory: Path) -> Dict[PeaType, PeaClassifier]:
    bank: Dict[PeaType, PeaClassifier] = {}
    for path in sorted(directory.glob("*.peac")):
        clf = PeaClassifier.load(path)
        bank[clf.pea_type] = clf
    return bank


def cmd_analyze(opts) -> int:
    bank = _load_bank(Path(opts["classifier_dir"]))
    prov = _provenance("analyze", opts)
    reports = []
    for seq_path in opts["sequences"]:
        reader = open_sequence(seq_path)
        reports.append(sequence_intensity(bank, reader, grid_size=opts["grid"]))
        if opts["maps"]:
            maps_dir = Path(opts["maps"])
            maps_dir.mkdir(parents=True, exist_ok=True)
            frame = reader.read_frame(0)
            for pea_type, clf in bank.items():
                if clf.n_frames == 1:
                    image = pea_map(clf, frame, grid_size=opts["grid"])
                elif reader.frame_count >= TEMPORAL_SPAN:
                    image = pea_map(clf, reader.read_frames(0, TEMPORAL_SPAN),
                                    grid_size=opts["grid"])
                else:
                    continue
                write_pgm(image, maps_dir /
                          f"{reader.meta.name}_{pea_type.wire_name}.pgm")
    table = qp_report(reports)
    csv_path = Path(opts["out_csv"])
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [_provenance_comment(prov)] + table.to_csv_lines()
    if table.monotonicity is None:
        lines.append("# qp_monotonicity: n/a")
    else:
        lines.append(f"# qp_monotonicity: {table.monotonicity!r}")
    csv_path.write_text("\n".join(lines) + "\n", "utf-8")
    if opts["out_json"]:
        payload = {
            "provenance": prov,
            "reports": [r.to_dict() for r in reports],
            "qp_table": json.loads(table.to_json()),
        }
        Path(opts["out_json"]).write_text(
            json.dumps(payload, sort_keys=True) + "\n", "utf-8"
        )
    mono = "n/a" if table.monotonicity is None else f"{table.monotonicity:.3f}"
    print(f"analyzed {len(reports)} sequence(s); qp monotonicity diagnostic: {mono}")
    return EXIT_OK


def cmd_serve(opts) -> int:
    from .service import run

    run(_data_dir(opts["data_dir"]), opts["annotations"],
        host=opts["host"], port=opts["port"])
    return EXIT_OK


# -- argument plumbing ----------------------------------------------------------


def _ratio(text: str):
    a, _, b = text.partition(":")
    try:
        return (int(a), int(b))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratio must look like 1:2, got {text!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="peakit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file whose entries override flags")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("extract", help="render sequence frames as images")
    common(p)
    p.add_argument("--sequence", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--first-frame", type=int, default=0)
    p.add_argument("--last-frame", type=int, default=None)
    p.add_argument("--image-format", choices=("png", "pgm"), default="png")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("label", help="annotations + sequences -> patch store")
    common(p)
    p.add_argument("--annotations", required=True)
    p.add_argument("--sequences", default=None,
                   help="directory of .yuv files (default $PEA_DATA_DIR)")
    p.add_argument("--out-store", required=True)
    p.add_argument("--ratio", type=_ratio, default=(1, 2),
                   help="compressed-uncircled : reference negatives (default 1:2)")
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--min-votes", type=int, default=1)
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="train one artifact classifier")
    common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--pea-type", required=True,
                   choices=[t.wire_name for t in PeaType])
    p.add_argument("--arch", choices=("lenet5", "resnext"), default="resnext")
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None, help="per-epoch CSV log path")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--lr-drops", default="20,30,36",
                   help="comma-separated epoch indices (factor 10 each)")
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--augment", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--paper-mode", action="store_true",
                   help="batch 256 and exactly three lr drops")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a store split")
    common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="artifact intensity reports and maps")
    common(p)
    p.add_argument("--sequences", nargs="+", required=True)
    p.add_argument("--classifier-dir", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", default=None)
    p.add_argument("--maps", default=None, help="directory for per-type PGM maps")
    p.add_argument("--grid", type=int, default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    common(p)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--annotations", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.set_defaults(func=cmd_serve)
    return parser


def _apply_config_file(opts: Dict) -> Dict:
    """Config file entries override flags (kebab-case keys accepted)."""
    if not opts.get("config"):
        return opts
    data = json.loads(Path(opts["config"]).read_text("utf-8"))
    for key, value in data.items():
        snake = key.replace("-", "_")
        if snake not in opts:
            raise _UsageError(f"config file sets unknown option {key!r}")
        if snake == "ratio" and isinstance(value, str):
            value = _ratio(value)
        opts[snake] = value
    return opts


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        opts = _apply_config_file(vars(ns))
        return opts["func"](opts)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except (PeaKitError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        raise
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
