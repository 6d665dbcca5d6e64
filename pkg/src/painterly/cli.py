"""Command-line front end for the harmonization pipeline."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import backbone
from .estimator import (
    EstimatorError,
    load_style_probs,
    load_style_table,
    median_tv,
    predict_weights,
    tv_sigmoid,
    WeightTriple,
)
from .harmonize import (
    HarmonizeError,
    PassConfig,
    pass1_config,
    pass2_config,
    resize_inputs,
    single_pass,
)
from .imageio import ImageIOError, load_image, load_mask, save_image
from .lbfgs import OptimizationError
from .losses import LossError
from .postprocess import full_postprocess

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

DEFAULT_TAU = 5.0  # "Medium" stylization when no style probabilities are given


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="painterly",
        description="Harmonize a pasted element into a background painting.")
    parser.add_argument("--input", required=True,
                        help="cut-and-paste composite PNG")
    parser.add_argument("--mask", required=True,
                        help="binary PNG marking the pasted element")
    parser.add_argument("--style", required=True, help="background painting PNG")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--weights", required=True,
                        help="NPHW weight file for the feature extractor")
    parser.add_argument("--style-probs",
                        help="JSON with style-class probabilities for the painting")
    parser.add_argument("--style-table",
                        help="JSON style strength table (default: bundled 18 styles)")
    parser.add_argument("--size", type=int, default=512,
                        help="maximum processing dimension (default 512)")
    parser.add_argument("--iters1", type=int, default=1000,
                        help="pass-1 solver iterations")
    parser.add_argument("--iters2", type=int, default=1000,
                        help="pass-2 solver iterations")
    parser.add_argument("--pass", dest="passes", choices=("1", "2", "both"),
                        default="both", help="which passes to run")
    parser.add_argument("--no-postprocess", action="store_true",
                        help="skip chrominance denoising and patch synthesis")
    parser.add_argument("--dilate", type=int, default=8,
                        help="mask dilation radius for the optimized region")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for the patch-synthesis matcher")
    parser.add_argument("--debug-dir",
                        help="directory for intermediate images and traces")
    return parser


def configs_for_bank(bank: backbone.WeightBank, weights: WeightTriple,
                     iters1: int, iters2: int) -> tuple[PassConfig, PassConfig]:
    """Layer choices for the two passes, scaled down for shallow banks."""
    names = set(bank.layer_names)
    if {"conv3_1", "conv4_1", "conv5_1"} <= names:
        cfg1 = pass1_config(w_s=weights.w_s, iterations=iters1)
        cfg2 = pass2_config(w_s=weights.w_s, w_hist=weights.w_hist,
                            w_tv=weights.w_tv, iterations=iters2)
        return cfg1, cfg2
    block_firsts = [n for n in bank.layer_names if n.endswith("_1")]
    deepest = block_firsts[-1]
    style1 = block_firsts[-3:]
    cfg1 = PassConfig(content_layers={deepest: 1.0},
                      style_layers={n: 1.0 / len(style1) for n in style1},
                      mapping="independent", target_mode="all",
                      w_s=weights.w_s, iterations=iters1)
    cfg2 = PassConfig(content_layers={deepest: 1.0},
                      style_layers={n: 1.0 / len(block_firsts) for n in block_firsts},
                      hist_layers={"conv1_1": 0.5, deepest: 0.5},
                      mapping="consistent", target_mode="unique",
                      ref_layer=deepest,
                      w_s=weights.w_s, w_hist=weights.w_hist, w_tv=weights.w_tv,
                      iterations=iters2)
    return cfg1, cfg2


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0

    try:
        bank = backbone.load_weights(args.weights)
        table = load_style_table(args.style_table)
        image = load_image(args.input)
        mask = load_mask(args.mask)
        style = load_image(args.style)
        probs = load_style_probs(args.style_probs) if args.style_probs else None
    except (ImageIOError, backbone.WeightFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EstimatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if mask.shape != image.shape[:2]:
        print(f"error: mask {mask.shape} does not match input "
              f"{image.shape[:2]}", file=sys.stderr)
        return EXIT_USAGE
    if image.shape != style.shape:
        print(f"error: input {image.shape[:2]} and painting "
              f"{style.shape[:2]} sizes differ", file=sys.stderr)
        return EXIT_USAGE
    if not mask.any():
        print("error: mask is empty", file=sys.stderr)
        return EXIT_USAGE

    image, mask, style = resize_inputs(image, mask, style, args.size)

    try:
        if probs is None:
            weights = WeightTriple(DEFAULT_TAU, DEFAULT_TAU,
                                   DEFAULT_TAU * tv_sigmoid(median_tv(style)))
        else:
            weights = predict_weights(style, probs, table)
        cfg1, cfg2 = configs_for_bank(bank, weights, args.iters1, args.iters2)

        debug = Path(args.debug_dir) if args.debug_dir else None
        if debug:
            debug.mkdir(parents=True, exist_ok=True)
        trace_rows = []

        def run_one(tag, img, cfg, content_image=None):
            sink: list = []
            rows = []

            def on_iter(it, loss):
                if sink:
                    rows.append((tag, it, sink[-1]))

            result = single_pass(img, mask, style, cfg, bank,
                                 content_image=content_image,
                                 dilation_radius=args.dilate,
                                 callback=on_iter, trace_sink=sink)
            if sink:
                trace_rows.append((tag, 0, sink[0]))
            trace_rows.extend(rows)
            if result.report.reason == "non-finite":
                raise OptimizationError(f"{tag}: non-finite loss encountered")
            return result

        working = image
        pass2_result = None
        if args.passes in ("1", "both"):
            r1 = run_one("pass1", working, cfg1)
            working = r1.image
            if debug:
                save_image(working, debug / "pass1.png")
        if args.passes in ("2", "both"):
            content = image if args.passes == "both" else None
            pass2_result = run_one("pass2", working, cfg2, content_image=content)
            working = pass2_result.image
            if debug:
                save_image(working, debug / "pass2.png")

        if not args.no_postprocess:
            working = full_postprocess(working, style, mask, seed=args.seed)
    except (HarmonizeError, LossError, EstimatorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OptimizationError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    try:
        save_image(working, args.out)
        if debug:
            if pass2_result is not None and pass2_result.mapping.ref_layer:
                ref = pass2_result.mapping.ref_layer
                field = pass2_result.mapping
                triples = [(ref, int(p), int(field.layers[ref][p]))
                           for p in field.domain(ref)]
                (debug / "mapping_lref.json").write_text(json.dumps(triples))
            with open(debug / "loss_trace.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["pass", "iteration", "content", "style",
                                 "hist", "tv", "total"])
                for tag, it, bd in trace_rows:
                    writer.writerow([tag, it, bd["content"], bd["style"],
                                     bd["hist"], bd["tv"], bd["total"]])
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
