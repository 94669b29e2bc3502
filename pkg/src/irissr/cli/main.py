"""Command-line entry point: ``python -m irissr <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from ..eval import compute_eer, histogram, histogram_svg, quality_report, roc_curve, roc_svg
from ..eval.report import write_text
from ..imgcore import load_image, save_image
from ..sr import interpolation_engine, load_engine, save_engine, super_resolve
from ..sr.engine import INTERPOLATION_KINDS, ENGINE_KINDS
from . import fixtures
from .config import MATCHERS, SEGMENTATION_SOURCES, ConfigError, EngineSpec, load_config
from .manifest import load_manifest, manifest_digest
from .pipeline import POLARITY, quantize8, run_experiment, save_scores, train_engine, verify

log = logging.getLogger("irissr")

IMAGE_EXTS = (".png", ".pgm", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff")


def _images_in(path) -> list[str]:
    if os.path.isdir(path):
        return sorted(os.path.join(path, f) for f in os.listdir(path) if f.lower().endswith(IMAGE_EXTS))
    return [path]


def cmd_train(args) -> int:
    entries = load_manifest(args.manifest)
    if not entries:
        raise ValueError("empty manifest")
    spec = EngineSpec(kind=args.engine, train_corpus=args.corpus or "-", learning_rate=args.lr,
                      momentum=args.momentum, grad_clip=args.grad_clip, lr_decay=args.lr_decay,
                      batch_size=args.batch_size, epochs=args.epochs, patch=args.patch,
                      stride=args.stride, budget=args.budget, augment=args.augment, depth=args.depth,
                      width=args.width, n_res_blocks=args.res_blocks, adv_weight=args.adv_weight)
    if spec.kind in INTERPOLATION_KINDS:
        raise ValueError(f"{spec.kind} needs no training")
    images = [load_image(e.path) for e in entries]
    engine = train_engine(spec, images, args.factor, args.seed,
                          {"train_manifest_digest": manifest_digest(entries)})
    out = args.out or f"{spec.kind}.model"
    save_engine(out, engine)
    print(f"saved {engine.kind} engine for factors {list(engine.factors)} to {out}")
    return 0


def _engine_from_args(args):
    if args.model:
        return load_engine(args.model)
    if args.engine in INTERPOLATION_KINDS:
        return interpolation_engine(args.engine)
    raise ValueError(f"engine {args.engine!r} needs --model")


def cmd_sr(args) -> int:
    engine = _engine_from_args(args)
    factor = args.factor[0]
    os.makedirs(args.out, exist_ok=True)
    paths = [p for item in args.inputs for p in _images_in(item)]
    if not paths:
        raise ValueError("no input images")
    if not engine.supports(factor):
        raise ValueError(f"{engine.kind} engine was trained for factors {list(engine.factors)}, not {factor}")
    failed = 0
    for p in paths:
        try:
            img = load_image(p)
            if args.from_hr:
                from ..imgcore import downscale

                h, w = img.shape
                out = super_resolve(engine, downscale(img, factor), factor, out_size=(w, h))
            else:
                size = (args.width, args.height) if args.width and args.height else None
                out = super_resolve(engine, img, factor, out_size=size)
            name = os.path.splitext(os.path.basename(p))[0] + ".png"
            save_image(os.path.join(args.out, name), quantize8(out))
        except Exception as exc:
            failed += 1
            print(f"error: {p}: {exc}", file=sys.stderr)
    print(f"wrote {len(paths) - failed} image(s) to {args.out}")
    return 1 if failed else 0


def cmd_assess(args) -> int:
    ref = {os.path.splitext(os.path.basename(p))[0]: p for p in _images_in(args.ref)}
    test = {os.path.splitext(os.path.basename(p))[0]: p for p in _images_in(args.test)}
    common = sorted(set(ref) & set(test))
    unmatched = sorted(set(ref) ^ set(test))
    roi = tuple(args.roi) if args.roi else None
    rows, errors = [], [f"unmatched: {n}" for n in unmatched]
    pairs = []
    for name in common:
        try:
            a, b = load_image(ref[name]), load_image(test[name])
            pairs.append((name, a, b))
        except Exception as exc:
            errors.append(f"{name}: {exc}")
    summary = None
    if pairs:
        try:
            summary = quality_report([(a, b) for _, a, b in pairs], roi=roi, with_fsim=not args.no_fsim)
            rows = [(n, q) for (n, _, _), q in zip(pairs, summary.per_pair)]
        except ValueError as exc:
            errors.append(str(exc))
    out = args.out or "quality.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image", "psnr", "ssim", "fsim"])
        for n, q in rows:
            w.writerow([n, f"{q.psnr:.6f}", f"{q.ssim:.6f}", f"{q.fsim:.6f}"])
        if summary is not None:
            m, s = summary.mean, summary.std
            w.writerow(["mean", f"{m.psnr:.6f}", f"{m.ssim:.6f}", f"{m.fsim:.6f}"])
            w.writerow(["std", f"{s.psnr:.6f}", f"{s.ssim:.6f}", f"{s.fsim:.6f}"])
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    print(f"assessed {len(rows)} pair(s) -> {out}")
    return 1 if errors else 0


def cmd_verify(args) -> int:
    enroll = load_manifest(args.manifest)
    probe = load_manifest(args.probe) if args.probe else enroll
    if not enroll or not probe:
        raise ValueError("manifests must be nonempty")
    matcher = args.matcher
    failures = []
    scores = verify(enroll, [load_image(e.path) for e in enroll], probe,
                    [load_image(e.path) for e in probe], matcher, args.segmentation, args.max_shift,
                    args.impostor_budget, args.seed, failures)
    eer = compute_eer(scores)
    os.makedirs(args.out, exist_ok=True)
    bad = {f.image for f in failures}
    ok_probe = [e for e in probe if e.name not in bad]
    ok_enroll = [e for e in enroll if e.name not in bad]
    same = args.probe is None or os.path.abspath(args.probe) == os.path.abspath(args.manifest)
    save_scores(os.path.join(args.out, "scores.csv"), scores, [e.label for e in ok_probe],
                None if same else [e.label for e in ok_enroll])
    write_text(os.path.join(args.out, "hist.svg"), histogram_svg(histogram(scores), matcher, POLARITY[matcher]))
    write_text(os.path.join(args.out, "roc.svg"), roc_svg(roc_curve(scores), matcher))
    with open(os.path.join(args.out, "eer.json"), "w") as fh:
        json.dump({"matcher": matcher, "eer": eer, "n_genuine": scores.counts[0],
                   "n_impostor": scores.counts[1], "failures": [f.as_dict() for f in failures]},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"EER {eer:.6f} ({scores.counts[0]} genuine, {scores.counts[1]} impostor, "
          f"{len(failures)} excluded)")
    return 1 if failures else 0


def cmd_experiment(args) -> int:
    overrides = {"seed": args.seed, "out": os.path.abspath(args.out) if args.out else None}
    if args.factor:
        overrides["factors"] = args.factor
    if args.matcher:
        overrides["matchers"] = args.matcher
    cfg = load_config(args.config, overrides)
    if args.engine:
        cfg.engines = [e for e in cfg.engines if e.kind in args.engine]
    result = run_experiment(cfg)
    for row in result.rows:
        print(f"{row.engine:>14s} x{row.factor:<3d} {row.matcher:5s} EER {row.eer:.4f}  "
              f"PSNR {row.mean_psnr:.2f}  SSIM {row.mean_ssim:.4f}")
    for f in result.failures:
        print(f"failure: {f.stage} {f.image} [{f.engine} x{f.factor}]: {f.error}", file=sys.stderr)
    print(f"report: {result.report_path} (config digest {result.digest})")
    return 0 if result.ok else 1


def cmd_fixtures(args) -> int:
    out = args.out or "fixtures"
    if args.kind == "eyes":
        paths = fixtures.write_eye_fixtures(out, args.subjects, args.samples, args.seed, args.enroll)
    else:
        paths = fixtures.write_texture_fixtures(out, args.count, args.size, args.seed)
    for role, p in paths.items():
        print(f"{role}: {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="irissr", description="Iris super-resolution toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="train an SR engine from a manifest")
    t.add_argument("--manifest", required=True)
    t.add_argument("--engine", required=True, choices=[k for k in ENGINE_KINDS if k not in INTERPOLATION_KINDS])
    t.add_argument("--factor", type=int, action="append", required=True)
    t.add_argument("--corpus", default=None, help="training corpus label for reports")
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--grad-clip", type=float, default=None)
    t.add_argument("--lr-decay", type=float, default=1.0)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--patch", type=int, default=None)
    t.add_argument("--stride", type=int, default=14)
    t.add_argument("--budget", type=int, default=None)
    t.add_argument("--augment", action="store_true", help="train on rot90/flip variants too")
    t.add_argument("--depth", type=int, default=20)
    t.add_argument("--width", type=int, default=64)
    t.add_argument("--res-blocks", type=int, default=16)
    t.add_argument("--adv-weight", type=float, default=1e-3)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sr", parents=[common], help="super-resolve images")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--engine", default="bicubic", choices=ENGINE_KINDS)
    s.add_argument("--model", default=None)
    s.add_argument("--factor", type=int, action="append", required=True)
    s.add_argument("--width", type=int, default=None)
    s.add_argument("--height", type=int, default=None)
    s.add_argument("--from-hr", action="store_true",
                   help="inputs are HR: downscale by the factor first, reconstruct at input size")
    s.set_defaults(func=cmd_sr)

    a = sub.add_parser("assess", parents=[common], help="PSNR/SSIM/FSIM of matched image pairs")
    a.add_argument("--ref", required=True)
    a.add_argument("--test", required=True)
    a.add_argument("--roi", type=int, nargs=4, metavar=("X", "Y", "W", "H"))
    a.add_argument("--no-fsim", action="store_true")
    a.set_defaults(func=cmd_assess)

    v = sub.add_parser("verify", parents=[common], help="score probes against enrolment")
    v.add_argument("--manifest", required=True, help="enrolment manifest")
    v.add_argument("--probe", default=None, help="probe manifest (default: all-pairs within --manifest)")
    v.add_argument("--matcher", choices=MATCHERS, default="gabor")
    v.add_argument("--segmentation", choices=SEGMENTATION_SOURCES, default="sidecar")
    v.add_argument("--max-shift", type=int, default=8)
    v.add_argument("--impostor-budget", type=int, default=None)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", parents=[common], help="run a full TOML-configured sweep")
    e.add_argument("--config", required=True)
    e.add_argument("--factor", type=int, action="append", default=None)
    e.add_argument("--matcher", action="append", choices=MATCHERS, default=None)
    e.add_argument("--engine", action="append", choices=ENGINE_KINDS, default=None)
    e.set_defaults(func=cmd_experiment)

    f = sub.add_parser("fixtures", parents=[common], help="generate synthetic data")
    f.add_argument("--kind", choices=("eyes", "textures"), default="eyes")
    f.add_argument("--subjects", type=int, default=20)
    f.add_argument("--samples", type=int, default=4)
    f.add_argument("--enroll", type=int, default=1, help="samples per subject used for enrolment")
    f.add_argument("--count", type=int, default=32)
    f.add_argument("--size", type=int, default=96)
    f.set_defaults(func=cmd_fixtures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("verify", "sr") and args.out is None:
        args.out = args.command + "_out"
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (ValueError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
