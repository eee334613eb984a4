"""Command-line entry point: ``elvc <subcommand> ...``.

Every stage reads and writes files only, so stages can be rerun or swapped
with external tools (for example real extractor outputs dropped in as ELF1).
"""

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from elvc import align as A
from elvc.config import PipelineConfig, load_config
from elvc.errors import ConfigError, ElvcError
from elvc.evaluation import EvalReport, as_lms, utterance_mcd
from elvc.features import log_mel_spectrogram, mcc_from_logmel
from elvc.gradcheck import format_table, run_gradcheck
from elvc.io import (
    FeatureMatrix,
    LayeredFeatureSet,
    read_feature_array,
    read_feature_file,
    read_landmarks,
    read_wav,
    write_feature_file,
    write_wav,
)
from elvc.neural import MODES, convert, load_checkpoint, save_checkpoint, train
from elvc.visual import landmark_features, upsample_to_audio
from elvc.wsola import stretch, stretch_to_length

log = logging.getLogger("elvc")

PAIRS_FILE = "pairs.csv"
VISUAL_SOURCES = ("none", "landmarks", "external")


def _map(fn, items, jobs):
    """Apply ``fn`` to ``items`` in input order, optionally across processes."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_path_csv(path, out):
    with open(out, "w") as fh:
        for i, j in path.pairs:
            fh.write(f"{i},{j}\n")


def read_path_csv(src):
    rows = np.loadtxt(src, delimiter=",", dtype=np.int64, ndmin=2)
    return A.AlignmentPath(rows, float("nan"))


def _features(cfg, wav):
    return log_mel_spectrogram(wav, cfg.stft, cfg.mel)


def cmd_features(args, cfg):
    wav = read_wav(args.input)
    lms = _features(cfg, wav)
    if args.lms:
        write_feature_file(lms, args.lms)
    if args.mcc:
        write_feature_file(mcc_from_logmel(lms, cfg.mcc), args.mcc)
    if not (args.lms or args.mcc):
        raise ConfigError("features", "give --lms and/or --mcc")
    log.info("%s: %d frames", args.input, lms.n_frames)


def cmd_stretch(args, cfg):
    wav = read_wav(args.input)
    if args.target_wav:
        out = stretch_to_length(wav, len(read_wav(args.target_wav)), cfg.wsola)
    else:
        out = stretch(wav, args.alpha, cfg.wsola)
    write_wav(out, args.output)
    log.info("wrote %s (%d samples)", args.output, len(out))


def run_alignment(method, source, target, cfg, band=None):
    """Align one EL/NL pair; returns (path, cost matrix, stretched NL or None)."""
    if method == "dtw-lip":
        el_lm, nl_lm = read_landmarks(source), read_landmarks(target)
        cost = A.cost_matrix_landmarks(el_lm, nl_lm)
        video = A.dtw(cost, band=band)
        return A.expand_video_path(video), cost, None
    el, nl = read_wav(source), read_wav(target)
    stretched = None
    if method == "dtw-wsola":
        stretched = stretch_to_length(nl, len(el), cfg.wsola)
        nl = stretched
    src = mcc_from_logmel(_features(cfg, el), cfg.mcc)
    tgt = mcc_from_logmel(_features(cfg, nl), cfg.mcc)
    cost = A.cost_matrix_mcc(src, tgt)
    return A.dtw(cost, band=band), cost, stretched


def cmd_align(args, cfg):
    from elvc.plotting import plot_alignment

    os.makedirs(args.out_dir, exist_ok=True)
    path, cost, stretched = run_alignment(args.method, args.source, args.target, cfg, args.band)
    _write_path_csv(path, os.path.join(args.out_dir, "path.csv"))
    if stretched is not None:
        write_wav(stretched, os.path.join(args.out_dir, "stretched.wav"))
    with open(os.path.join(args.out_dir, "summary.txt"), "w") as fh:
        fh.write(f"method={args.method}\n")
        fh.write(f"pairs={len(path)}\n")
        fh.write(f"total_cost={path.total_cost!r}\n")
        fh.write(f"mean_cost={path.mean_cost!r}\n")
    if not args.no_plot:
        video_cost = args.method == "dtw-lip"
        shown = A.dtw(cost) if video_cost else path
        plot_alignment(cost, shown, os.path.join(args.out_dir, "path.png"), title=args.method)
    print(f"{args.method}: total cost {path.total_cost:.6f} over {len(path)} pairs")


def _read_list(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError("--list", f"{path} has no utterances")
    for col in ("utt_id", "el_wav", "nl_wav"):
        if col not in rows[0]:
            raise ConfigError("--list", f"{path} lacks column {col}")
    return rows


def _prepare_one(job):
    row, method, visual, out_dir, cfg = job
    utt = row["utt_id"]
    el, nl = read_wav(row["el_wav"]), read_wav(row["nl_wav"])
    src = _features(cfg, el)
    if method == "dtw-lip":
        tgt = _features(cfg, nl)
        path = A.align_dtw_lip(
            read_landmarks(row["el_landmarks"]), read_landmarks(row["nl_landmarks"]), src.n_frames, tgt.n_frames
        )
    else:
        if method == "dtw-wsola":
            nl = stretch_to_length(nl, len(el), cfg.wsola)
        tgt = _features(cfg, nl)
        path = A.dtw(A.cost_matrix_mcc(mcc_from_logmel(src, cfg.mcc), mcc_from_logmel(tgt, cfg.mcc)))
    warped = A.apply_warp(path, tgt)
    src = FeatureMatrix(src.data[: warped.n_frames], src.frame_shift_s, "LMS")
    write_feature_file(src, os.path.join(out_dir, f"{utt}.src.elf1"))
    write_feature_file(warped, os.path.join(out_dir, f"{utt}.tgt.elf1"))
    if visual == "landmarks":
        vis = landmark_features(read_landmarks(row["el_landmarks"]))
    elif visual == "external":
        vis = read_feature_file(row["visual"])
    else:
        return utt, path.mean_cost
    write_feature_file(upsample_to_audio(vis, src.n_frames), os.path.join(out_dir, f"{utt}.vis.elf1"))
    return utt, path.mean_cost


def cmd_prepare(args, cfg):
    rows = _read_list(args.list)
    needs = {"dtw-lip": ["el_landmarks", "nl_landmarks"]}.get(args.align_method, [])
    needs += {"landmarks": ["el_landmarks"], "external": ["visual"]}.get(args.visual, [])
    for col in needs:
        if col not in rows[0]:
            raise ConfigError("--list", f"{args.list} lacks column {col}")
    os.makedirs(args.out_dir, exist_ok=True)
    jobs = [(row, args.align_method, args.visual, args.out_dir, cfg) for row in rows]
    results = _map(_prepare_one, jobs, args.jobs)
    with open(os.path.join(args.out_dir, PAIRS_FILE), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["utt_id", "source", "target", "visual", "align_mean_cost"])
        for utt, cost in results:
            vis = f"{utt}.vis.elf1" if args.visual != "none" else ""
            writer.writerow([utt, f"{utt}.src.elf1", f"{utt}.tgt.elf1", vis, repr(float(cost))])
    print(f"prepared {len(results)} utterances with {args.align_method}")


def load_prepared(data_dir, want_visual):
    with open(os.path.join(data_dir, PAIRS_FILE), newline="") as fh:
        rows = list(csv.DictReader(fh))
    items = []
    for row in rows:
        src = read_feature_array(os.path.join(data_dir, row["source"]))[0]
        tgt = read_feature_array(os.path.join(data_dir, row["target"]))[0]
        vis = None
        if want_visual:
            if not row["visual"]:
                raise ConfigError("--mode", f"utterance {row['utt_id']} has no visual features")
            vis = LayeredFeatureSet(read_feature_array(os.path.join(data_dir, row["visual"])), "visual")
        items.append((row["utt_id"], src, vis, tgt))
    return items


def cmd_train(args, cfg):
    from elvc.plotting import plot_loss

    tcfg = cfg.train
    items = load_prepared(args.data, args.mode != "audio_only")
    params, history = train([(s, v, t) for _, s, v, t in items], tcfg, args.mode, cfg.model)
    save_checkpoint(params, args.out)
    with open(os.path.join(args.out, "loss.csv"), "w") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(history, start=1):
            fh.write(f"{epoch},{loss!r}\n")
    if history and not args.no_plot:
        plot_loss(history, os.path.join(args.out, "loss.png"), title=args.mode)
    print(f"trained {args.mode} for {tcfg.epochs} epochs; final loss {history[-1] if history else float('nan'):.6f}")


def _convert_one(job):
    params, utt, src, vis, out_dir = job
    pred = convert(params, FeatureMatrix(src, kind="LMS"), vis)
    write_feature_file(pred, os.path.join(out_dir, f"{utt}.elf1"))
    return utt


def cmd_convert(args, cfg):
    params = load_checkpoint(args.checkpoint)
    items = load_prepared(args.data, params.multimodal)
    os.makedirs(args.out_dir, exist_ok=True)
    done = _map(_convert_one, [(params, u, s, v, args.out_dir) for u, s, v, _ in items], args.jobs)
    print(f"converted {len(done)} utterances")


def _target_file(target_dir, utt):
    for name in (f"{utt}.tgt.elf1", f"{utt}.elf1"):
        if os.path.exists(os.path.join(target_dir, name)):
            return os.path.join(target_dir, name)
    return None


def _converted_files(conv_dir):
    """Map utt_id -> file: ``<utt>.elf1``, else ``<utt>.src.elf1`` (the unconverted baseline)."""
    found = {}
    for name in sorted(os.listdir(conv_dir)):
        if not name.endswith(".elf1"):
            continue
        stem = name[: -len(".elf1")]
        tag = os.path.splitext(stem)[1]
        if tag in (".tgt", ".vis"):
            continue
        utt, rank = (stem[: -len(tag)], 1) if tag == ".src" else (stem, 0)
        if utt not in found or rank < found[utt][0]:
            found[utt] = (rank, os.path.join(conv_dir, name))
    return {utt: path for utt, (_, path) in sorted(found.items())}


def _eval_one(job):
    conv_path, tgt_path, mcc_cfg = job
    conv = as_lms(read_feature_array(conv_path)[0])
    tgt = as_lms(read_feature_array(tgt_path)[0])
    return utterance_mcd(conv, tgt, mcc_cfg)


def cmd_eval(args, cfg):
    from elvc.plotting import plot_report

    utts, jobs = [], []
    for utt, conv_path in _converted_files(args.converted).items():
        tgt = _target_file(args.target, utt)
        if tgt is None:
            log.warning("no target for %s, skipped", utt)
            continue
        utts.append(utt)
        jobs.append((conv_path, tgt, cfg.mcc))
    if not jobs:
        raise ConfigError("--converted", "no converted/target pairs found")
    report = EvalReport(args.label, utts, _map(_eval_one, jobs, args.jobs))
    if args.merge_external:
        report.merge_external(args.merge_external)
    os.makedirs(args.out_dir, exist_ok=True)
    report.write_csv(os.path.join(args.out_dir, "report.csv"))
    with open(os.path.join(args.out_dir, "summary.txt"), "w") as fh:
        fh.write(report.summary())
    if not args.no_plot:
        plot_report(report, os.path.join(args.out_dir, "report.png"))
    sys.stdout.write(report.summary())


def cmd_gradcheck(args, cfg):
    results = run_gradcheck(n_configs=args.configs, seed=args.seed if args.seed is not None else cfg.seed)
    print(format_table(results))
    if not all(r.passed for r in results):
        raise ElvcError("gradient check failed")


def build_parser():
    p = argparse.ArgumentParser(prog="elvc", description="EL-to-NL speech alignment, conversion and evaluation")
    p.add_argument("--config", help="key=value config file (e.g. stft.hop=160)")
    p.add_argument("--seed", type=int, default=None, help="overrides seed and train.seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes over utterances")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("features", help="log-mel / mel-cepstrum ELF1 files from a WAV")
    s.add_argument("input")
    s.add_argument("--lms")
    s.add_argument("--mcc")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("stretch", help="WSOLA time-scale modification")
    s.add_argument("--input", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--target-wav", help="match this file's length")
    g.add_argument("--alpha", type=float, help="duration factor")
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_stretch)

    s = sub.add_parser("align", help="align an EL/NL pair")
    s.add_argument("--method", choices=A.METHODS, required=True)
    s.add_argument("source", help="EL wav (or landmark CSV for dtw-lip)")
    s.add_argument("target", help="NL wav (or landmark CSV for dtw-lip)")
    s.add_argument("--out-dir", default=".")
    s.add_argument("--band", type=int, default=None, help="Sakoe-Chiba half-width in frames")
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("prepare", help="build a frame-paired training set")
    s.add_argument("--list", required=True, help="CSV with utt_id,el_wav,nl_wav[,el_landmarks,nl_landmarks,visual]")
    s.add_argument("--align-method", choices=A.METHODS, default="dtw-wsola")
    s.add_argument("--visual", choices=VISUAL_SOURCES, default="none")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("train", help="train a conversion model")
    s.add_argument("--data", required=True)
    s.add_argument("--mode", choices=MODES, default="audio_only")
    s.add_argument("--out", required=True, help="checkpoint directory")
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("convert", help="run a checkpoint over a prepared set")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("eval", help="MCD report for converted vs target features")
    s.add_argument("--converted", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--label", default="system")
    s.add_argument("--merge-external", help="CSV with utt_id plus extra metric columns")
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference check of every layer kind")
    s.add_argument("--configs", type=int, default=20)
    s.set_defaults(func=cmd_gradcheck)
    return p


def resolve_config(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    seed = args.seed if args.seed is not None else cfg.seed
    cfg = PipelineConfig(**{**cfg.__dict__, "seed": seed})
    cfg = cfg.with_overrides("train", seed=seed)
    if args.command == "train":
        cfg = cfg.with_overrides("train", epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr)
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"elvc: config error: {exc}", file=sys.stderr)
        return 2
    except (ElvcError, FileNotFoundError, ValueError) as exc:
        print(f"elvc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
