#!/usr/bin/env node
/**
 * weight-export: convert a VGG-19 safetensors checkpoint into the NPHW
 * weight file, and emit reference activations for cross-validation.
 *
 *   weight-export export  <checkpoint.safetensors> <out.nphw>
 *                         [--manifest <out.json>] [--means r,g,b]
 *                         [--fold-torchvision] [--source <id>]
 *   weight-export fixture <checkpoint.safetensors> <image.pgm> <out.nphf>
 *                         [--layers conv1_1,conv4_1] [--means r,g,b]
 *                         [--fold-torchvision]
 */

import * as fs from "fs";

import { bankFromCheckpoint, manifestFor, ExportOptions } from "./export";
import { forward, Activation } from "./forward";
import { writeFixture } from "./fixture";
import { writeNphw } from "./nphw";
import { parseSafetensors } from "./safetensors";
import { grayToRgb, readPgm } from "./pgm";

function usage(): never {
  process.stderr.write(
    "usage: weight-export export <ckpt.safetensors> <out.nphw>"
    + " [--manifest m.json] [--means r,g,b] [--fold-torchvision] [--source id]\n"
    + "       weight-export fixture <ckpt.safetensors> <image.pgm> <out.nphf>"
    + " [--layers a,b] [--means r,g,b] [--fold-torchvision]\n");
  process.exit(2);
}

interface Parsed {
  positional: string[];
  options: Map<string, string | true>;
}

function parseArgs(argv: string[]): Parsed {
  const positional: string[] = [];
  const options = new Map<string, string | true>();
  const takesValue = new Set(["--manifest", "--means", "--layers", "--source"]);
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      if (takesValue.has(arg)) {
        if (i + 1 >= argv.length) usage();
        options.set(arg, argv[++i]);
      } else if (arg === "--fold-torchvision") {
        options.set(arg, true);
      } else {
        usage();
      }
    } else {
      positional.push(arg);
    }
  }
  return { positional, options };
}

function exportOptions(parsed: Parsed): ExportOptions {
  const opts: ExportOptions = {};
  const means = parsed.options.get("--means");
  if (typeof means === "string") {
    const parts = means.split(",").map(Number);
    if (parts.length !== 3 || parts.some((x) => !Number.isFinite(x))) {
      throw new Error(`--means expects three numbers, got ${means}`);
    }
    opts.means = [parts[0], parts[1], parts[2]];
  }
  if (parsed.options.get("--fold-torchvision")) opts.foldTorchvision = true;
  const source = parsed.options.get("--source");
  if (typeof source === "string") opts.source = source;
  return opts;
}

function main(): number {
  const [command, ...rest] = process.argv.slice(2);
  if (command === "export") {
    const parsed = parseArgs(rest);
    if (parsed.positional.length !== 2) usage();
    const [ckptPath, outPath] = parsed.positional;
    const opts = exportOptions(parsed);
    if (!opts.source) opts.source = ckptPath;
    const ckpt = parseSafetensors(fs.readFileSync(ckptPath));
    const bank = bankFromCheckpoint(ckpt, opts);
    fs.writeFileSync(outPath, writeNphw(bank));
    const manifest = manifestFor(bank, opts);
    const manifestPath = parsed.options.get("--manifest");
    if (typeof manifestPath === "string") {
      fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
    }
    process.stdout.write(
      `wrote ${outPath}: ${bank.layers.length} layers through `
      + `${bank.layers[bank.layers.length - 1].name}\n`);
    return 0;
  }
  if (command === "fixture") {
    const parsed = parseArgs(rest);
    if (parsed.positional.length !== 3) usage();
    const [ckptPath, imagePath, outPath] = parsed.positional;
    const opts = exportOptions(parsed);
    const layersOpt = parsed.options.get("--layers");
    const wanted = typeof layersOpt === "string"
      ? layersOpt.split(",")
      : ["conv1_1", "conv4_1"];
    const ckpt = parseSafetensors(fs.readFileSync(ckptPath));
    const bank = bankFromCheckpoint(ckpt, opts);
    const image = readPgm(fs.readFileSync(imagePath));
    const acts = forward(bank, grayToRgb(image), image.height, image.width, wanted);
    const ordered = new Map<string, Activation>();
    for (const name of wanted) ordered.set(name, acts.get(name)!);
    fs.writeFileSync(outPath, writeFixture(ordered));
    process.stdout.write(`wrote ${outPath}: ${wanted.join(", ")}\n`);
    return 0;
  }
  usage();
}

try {
  process.exit(main());
} catch (err) {
  process.stderr.write(`error: ${err instanceof Error ? err.message : err}\n`);
  process.exit(1);
}
