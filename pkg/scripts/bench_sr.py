"""Desk-scale SR benchmark on synthetic textures (24 train / 8 held out, factor 2).

Trains SRCNN and a slim 20-layer VDCNN and prints held-out PSNR next to bicubic.
Defaults match the recipe the acceptance suite uses.

    python scripts/bench_sr.py
    python scripts/bench_sr.py --skip-vdcnn --srcnn-epochs 3
"""

import argparse
import time

import numpy as np

from irissr.cli.fixtures import texture_corpus
from irissr.imgcore import psnr
from irissr.nn import SGDConfig
from irissr.sr import interpolation_engine, prepare_pairs, reconstruct_degraded, save_engine, train_srcnn, train_vdcnn


def mean_psnr(engine, images, factor):
    return float(np.mean([psnr(h, reconstruct_degraded(engine, h, factor)) for h in images]))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--factor", type=int, default=2)
    ap.add_argument("--size", type=int, default=96)
    ap.add_argument("--srcnn-epochs", type=int, default=5)
    ap.add_argument("--srcnn-lr", type=float, default=0.05)
    ap.add_argument("--vdcnn-epochs", type=int, default=8)
    ap.add_argument("--vdcnn-lr", type=float, default=0.06)
    ap.add_argument("--vdcnn-width", type=int, default=16)
    ap.add_argument("--vdcnn-budget", type=int, default=12_000)
    ap.add_argument("--skip-vdcnn", action="store_true")
    ap.add_argument("--save", help="directory to write trained models into")
    args = ap.parse_args()

    images = texture_corpus(32, args.size, seed=args.seed)
    train, test = images[:24], images[24:]
    print(f"bicubic  {mean_psnr(interpolation_engine(), test, args.factor):.3f} dB")

    t0 = time.process_time()
    pairs = prepare_pairs(train, args.factor, patch=33, stride=7, seed=args.seed, augment=True)
    cfg = SGDConfig(learning_rate=args.srcnn_lr, momentum=0.9, grad_clip=0.5, batch_size=16,
                    epochs=args.srcnn_epochs, lr_decay=0.6, seed=args.seed)
    srcnn = train_srcnn(pairs, cfg)
    print(f"srcnn    {mean_psnr(srcnn, test, args.factor):.3f} dB  ({len(pairs)} pairs, "
          f"{time.process_time() - t0:.0f} s CPU)")
    engines = {"srcnn": srcnn}

    if not args.skip_vdcnn:
        t0 = time.process_time()
        pairs = prepare_pairs(train, args.factor, patch=21, stride=7, seed=args.seed, augment=True,
                              budget=args.vdcnn_budget)
        cfg = SGDConfig(learning_rate=args.vdcnn_lr, momentum=0.9, grad_clip=1.0, batch_size=16,
                        epochs=args.vdcnn_epochs, lr_decay=0.75, seed=args.seed)
        vdcnn = train_vdcnn(pairs, cfg, depth=20, width=args.vdcnn_width)
        print(f"vdcnn    {mean_psnr(vdcnn, test, args.factor):.3f} dB  ({len(pairs)} pairs, "
              f"{time.process_time() - t0:.0f} s CPU)")
        engines["vdcnn"] = vdcnn

    if args.save:
        for kind, eng in engines.items():
            save_engine(f"{args.save}/{kind}_x{args.factor}.model", eng)


if __name__ == "__main__":
    main()
