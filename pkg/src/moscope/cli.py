"""``moscope`` command line.

Exit codes: 0 success, 1 runtime or data error, 2 usage error. Logs go to
stderr; results go to files only.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import shutil
import sys
from pathlib import Path

from . import analysis, metrics, models, synth
from .config import ConfigError, load_grid_config, load_run_config
from .corpus import CorpusError, WavFormatError, load_manifest, read_wav, \
    validate_speaker_disjointness
from .features import (FeatureError, StftConfig, load_embedding, mean_log_spectrum, read_features,
                       stft_magnitude, write_features)
from .nn import ShapeError

log = logging.getLogger("moscope")

FEATURES_META = "features.ini"


class CommandError(Exception):
    """A runtime failure reported as a one-line diagnostic with exit code 1."""


class Outputs:
    """Tracks files a command creates so they can be removed if it fails."""

    def __init__(self):
        self.paths: list[Path] = []

    def path(self, p) -> Path:
        p = Path(p)
        if not p.exists():
            self.paths.append(p)
        return p

    def write_text(self, p, text):
        p = self.path(p)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8", newline="")
        log.info("wrote %s", p)

    def cleanup(self):
        # only paths that did not exist before the command ran are tracked
        for p in reversed(self.paths):
            try:
                if p.is_dir():
                    shutil.rmtree(p)
                else:
                    p.unlink()
            except OSError:
                pass


# --------------------------------------------------------------------------
# helpers

def _manifest(args):
    scale = getattr(args, "scale", None) or (1.0, 10.0)
    return load_manifest(args.manifest, *scale)


def _features_meta(feat_dir):
    cp = configparser.ConfigParser(interpolation=None)
    path = Path(feat_dir) / FEATURES_META
    if not path.exists():
        return None, None
    cp.read(path, encoding="utf-8")
    kind = cp.get("features", "kind")
    stft = None
    if cp.has_option("features", "fft_size"):
        stft = StftConfig(cp.getint("features", "fft_size"), cp.getint("features", "hop"),
                          cp.get("features", "window"), cp.getboolean("features", "log_magnitude"))
    return kind, stft


def _load_features(feat_dir, manifest, split=None):
    feat_dir = Path(feat_dir)
    if not feat_dir.is_dir():
        raise CommandError(f"{feat_dir}: features directory not found")
    out = {}
    missing = []
    for r in manifest.records:
        if split is not None and r.split not in split:
            continue
        p = feat_dir / f"{r.utt_id}.feat"
        if p.exists():
            out[r.utt_id] = read_features(p)
        else:
            missing.append(r.utt_id)
    if missing:
        log.warning("%d utterance(s) have no feature file, e.g. %s", len(missing), missing[0])
    if not out:
        raise CommandError(f"{feat_dir}: no feature files match the manifest")
    return out


# --------------------------------------------------------------------------
# commands

def cmd_gen_synth(args, out: Outputs):
    spec = synth.SynthSpec(args.speakers, args.systems, args.utts, args.seed, args.duration,
                           args.sample_rate, args.label_noise)
    out_dir = out.path(args.out)
    manifest = synth.generate_corpus(spec, out_dir)
    out.path(out_dir / synth.MANIFEST_NAME)
    tables = synth.oracle_tables(spec)
    print(out_dir / synth.MANIFEST_NAME)
    print(f"# {len(manifest)} utterances")
    print("level,group_id,expected_mos")
    for gid, v in sorted(tables.system.items()):
        print(f"system,{gid},{v:.4f}")
    for gid, v in sorted(tables.speaker.items()):
        print(f"speaker,{gid},{v:.4f}")


def cmd_extract(args, out: Outputs):
    manifest = _manifest(args)
    audio_dir = Path(args.audio_dir) if args.audio_dir else Path(args.manifest).parent
    out_dir = out.path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stft = StftConfig(args.fft, args.hop, args.window, args.log)
    meta = ["[features]", f"kind = {args.kind}"]
    if args.kind == "spectrogram" or args.source == "mean-spectrum":
        meta += [f"fft_size = {stft.fft_size}", f"hop = {stft.hop}", f"window = {stft.window}",
                 f"log_magnitude = {stft.log_magnitude}"]
    if args.kind == "embedding":
        meta.append(f"source = {args.source}")
    for r in manifest.records:
        if args.kind == "spectrogram":
            m = stft_magnitude(read_wav(audio_dir / r.audio_path), stft)
        elif args.source == "mean-spectrum":
            m = mean_log_spectrum(read_wav(audio_dir / r.audio_path), stft)
        else:
            m = load_embedding(audio_dir / r.audio_path, args.dim)
        target = out.path(out_dir / f"{r.utt_id}.feat")
        write_features(target, m)
    out.write_text(out_dir / FEATURES_META, "\n".join(meta) + "\n")
    log.info("extracted %d %s feature files into %s", len(manifest), args.kind, out_dir)


def _build(run_cfg, features, stft):
    first = next(iter(features.values()))
    if run_cfg.architecture == "frame":
        if first.kind != "spectrogram":
            raise CommandError("frame model needs spectrogram features")
        return models.build_frame_model(run_cfg.model, first.cols, stft)
    if first.kind != "embedding":
        raise CommandError("low_capacity model needs embedding features")
    return models.build_low_capacity_cnn(run_cfg.model, first.rows)


def cmd_train(args, out: Outputs):
    run_cfg = load_run_config(args.config)
    manifest = load_manifest(args.manifest, run_cfg.scale_min, run_cfg.scale_max)
    validate_speaker_disjointness(manifest)
    _, stft = _features_meta(args.features)
    feats = _load_features(args.features, manifest, split=("train", "val"))
    model = _build(run_cfg, feats, stft)
    model.scale = (run_cfg.scale_min, run_cfg.scale_max)
    train_set = models.Dataset.from_manifest(manifest, feats, "train")
    val_set = models.Dataset.from_manifest(manifest, feats, "val")
    models.train(model, train_set, val_set, run_cfg.optimizer, run_cfg.early_stop)
    models.save_model(out.path(args.out_model), model)
    log.info("saved model (best epoch %d of %d)", model.best_epoch, len(model.history))
    if args.history:
        rows = ["epoch,train_loss,val_mse"] + [f"{h['epoch']},{h['train_loss']!r},{h['val_mse']!r}"
                                              for h in model.history]
        out.write_text(args.history, "\n".join(rows) + "\n")


def cmd_grid(args, out: Outputs):
    grid = load_grid_config(args.grid)
    manifest = load_manifest(args.manifest, grid.scale_min, grid.scale_max)
    validate_speaker_disjointness(manifest)
    feats = _load_features(args.features, manifest, split=("train", "val"))
    workers = args.workers or models.default_workers()
    log.info("grid search over %d configurations with %d worker(s)", len(grid.configs), workers)
    best, board = models.grid_search(grid.configs, feats, manifest, grid.optimizer,
                                     grid.early_stop, workers=workers)
    best.scale = (grid.scale_min, grid.scale_max)
    models.save_model(out.path(args.out_model), best)
    out.write_text(args.leaderboard, models.leaderboard_to_csv(board))


def cmd_predict(args, out: Outputs):
    model = models.load_model(args.model)
    manifest = load_manifest(args.manifest, *model.scale)
    feats = _load_features(args.features, manifest)
    kind, _ = _features_meta(args.features)
    kinds = {m.kind for m in feats.values()} | ({kind} if kind else set())
    if kinds != {model.kind}:
        raise CommandError(f"{args.model}: {model.architecture} model expects {model.kind} "
                           f"features, got {', '.join(sorted(kinds))}")
    preds = models.predict_many(model, feats)
    out.write_text(args.out_preds, preds.to_csv())


def _split_arg(args):
    return None if args.split == "all" else args.split


def cmd_evaluate(args, out: Outputs):
    manifest = _manifest(args)
    preds = metrics.PredictionSet.read(args.preds)
    b = metrics.evaluate(preds, manifest, args.level, _split_arg(args))
    out.write_text(args.out, metrics.bundles_to_csv([b]))
    if args.out_groups and args.level != "utterance":
        aggs = metrics.aggregate_by(preds, manifest, args.level, _split_arg(args))
        out.write_text(args.out_groups, metrics.aggregates_to_csv(aggs))
    log.info("%s: lcc=%s srcc=%s mse=%.4f ktau=%s", b.level, b.lcc, b.srcc, b.mse, b.ktau)


def cmd_rank(args, out: Outputs):
    manifest = _manifest(args)
    preds = metrics.PredictionSet.read(args.preds)
    split = _split_arg(args)
    aggs = metrics.aggregate_by(preds, manifest, args.level, split)
    ranked = analysis.rank_groups(aggs)
    out.write_text(args.out_csv, analysis.ranking_csv(ranked))
    scatter_csv = args.out_scatter or str(Path(args.out_svg).with_suffix(".csv"))
    analysis.scatter_report(preds, manifest, args.level, out.path(scatter_csv),
                            out.path(args.out_svg), split)
    if args.out_cells:
        out.write_text(args.out_cells, analysis.cell_table_csv(
            analysis.per_system_speaker_table(preds, manifest, split)))
    for by in ("true", "pred"):
        best, worst = analysis.best_worst(aggs, by)
        log.info("by %s MOS: best %s %s, worst %s", by, args.level, best, worst)


# --------------------------------------------------------------------------
# parser

def _scale(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected MIN,MAX") from None
    return lo, hi


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="moscope", formatter_class=fmt,
                                description="Neural MOS prediction and speaker/system ranking.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-synth", formatter_class=fmt, help="generate a synthetic corpus")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--speakers", type=int, default=10, help="number of speakers")
    s.add_argument("--systems", type=int, default=5, help="number of systems")
    s.add_argument("--utts", type=int, default=20, help="utterances per speaker/system pair")
    s.add_argument("--seed", type=int, default=0, help="RNG seed")
    s.add_argument("--duration", type=float, default=2.0, help="seconds per utterance")
    s.add_argument("--sample-rate", type=int, default=16000, help="Hz")
    s.add_argument("--label-noise", type=float, default=0.3, help="label noise sd (MOS units)")
    s.set_defaults(func=cmd_gen_synth)

    s = sub.add_parser("extract", formatter_class=fmt, help="extract features per utterance")
    s.add_argument("--manifest", required=True)
    s.add_argument("--audio-dir", default=None, help="base for audio_path (default: manifest dir)")
    s.add_argument("--out", required=True, help="feature directory")
    s.add_argument("--kind", choices=("spectrogram", "embedding"), default="spectrogram",
                   help="feature kind")
    s.add_argument("--source", choices=("file", "mean-spectrum"), default="file",
                   help="embeddings: read audio_path as a FEAT file, or pool the log spectrum")
    s.add_argument("--dim", type=int, default=None, help="expected embedding dimension")
    s.add_argument("--fft", type=int, default=512, help="STFT frame length")
    s.add_argument("--hop", type=int, default=256, help="STFT hop")
    s.add_argument("--window", choices=("hann", "hamming", "rect"), default="hann",
                   help="analysis window")
    s.add_argument("--log", action="store_true", help="log-compress magnitudes")
    s.add_argument("--scale", type=_scale, default=(1.0, 10.0), help="MOS scale MIN,MAX")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train", formatter_class=fmt, help="train one model")
    s.add_argument("--config", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--out-model", required=True)
    s.add_argument("--history", default=None, help="optional per-epoch CSV")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("grid", formatter_class=fmt, help="grid search the low-capacity CNN")
    s.add_argument("--grid", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--out-model", required=True)
    s.add_argument("--leaderboard", required=True)
    s.add_argument("--workers", type=int, default=0, help="0: MOSCOPE_THREADS or CPU count")
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("predict", formatter_class=fmt, help="predict MOS per utterance")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--out-preds", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", formatter_class=fmt, help="LCC/SRCC/MSE/KTAU at one level")
    s.add_argument("--preds", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--level", choices=metrics.LEVELS, default="speaker",
                   help="aggregation level")
    s.add_argument("--split", choices=("all", "train", "val", "test"), default="all",
                   help="manifest split")
    s.add_argument("--out", required=True)
    s.add_argument("--out-groups", default=None, help="optional per-group aggregate CSV")
    s.add_argument("--scale", type=_scale, default=(1.0, 10.0), help="MOS scale MIN,MAX")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("rank", formatter_class=fmt, help="rank groups and draw the scatter")
    s.add_argument("--preds", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--level", choices=metrics.GROUP_LEVELS, default="speaker",
                   help="aggregation level")
    s.add_argument("--split", choices=("all", "train", "val", "test"), default="all",
                   help="manifest split")
    s.add_argument("--out-csv", required=True, help="ranking CSV")
    s.add_argument("--out-svg", required=True)
    s.add_argument("--out-scatter", default=None, help="scatter CSV (default: SVG path with .csv)")
    s.add_argument("--out-cells", default=None, help="optional per-system speaker table CSV")
    s.add_argument("--scale", type=_scale, default=(1.0, 10.0), help="MOS scale MIN,MAX")
    s.set_defaults(func=cmd_rank)
    return p


_RUNTIME_ERRORS = (CommandError, CorpusError, WavFormatError, FeatureError, ConfigError,
                   ShapeError, models.ModelFormatError, models.TrainingError, ValueError, OSError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    out = Outputs()
    try:
        args.func(args, out)
    except _RUNTIME_ERRORS as exc:
        out.cleanup()
        where = f"{exc.filename}: " if isinstance(exc, OSError) and exc.filename else ""
        msg = exc.strerror if isinstance(exc, OSError) and exc.strerror else str(exc)
        print(f"moscope {args.command}: error: {where}{msg}", file=sys.stderr)
        return 1
    except BaseException:
        out.cleanup()
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
