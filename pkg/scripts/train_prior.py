#!/usr/bin/env python3
"""Train the toy denoising prior on synthetic phantoms and save the weights."""

import argparse

from mricalib import PhantomSpec, make_phantom
from mricalib.unet import UNetArch, save_weights, train_toy_denoiser


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="weights path (.bt + .bt.arch)")
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--images", type=int, default=12, help="images per phantom kind")
    ap.add_argument("--kinds", nargs="+", default=["ellipse-phantom", "piecewise-smooth"])
    ap.add_argument("--epochs", type=int, default=120)
    ap.add_argument("--lr", type=float, default=0.3)
    ap.add_argument("--batch-size", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--widths", type=int, nargs="+", default=[8, 16])
    ap.add_argument("--bottleneck", type=int, default=32)
    ap.add_argument("--emb-steps", type=int, default=25)
    ap.add_argument("--sigma-min", type=float, default=0.01)
    ap.add_argument("--sigma-max", type=float, default=1.0)
    ap.add_argument("--band-cutoff", type=float, default=0.25)
    args = ap.parse_args()

    arch = UNetArch(
        widths=tuple(args.widths),
        bottleneck=args.bottleneck,
        emb_steps=args.emb_steps,
        sigma_min=args.sigma_min,
        sigma_max=args.sigma_max,
        band_cutoff=args.band_cutoff,
    )
    images = [
        make_phantom(PhantomSpec(size=args.size, seed=s, kind=k))
        for s in range(args.images)
        for k in args.kinds
    ]
    weights = train_toy_denoiser(
        images, epochs=args.epochs, seed=args.seed, arch=arch,
        lr=args.lr, batch_size=args.batch_size,
    )
    save_weights(args.out, weights)
    print(f"saved weights for {arch.layer_count}-skip network to {args.out}")


if __name__ == "__main__":
    main()
