import * as fs from "fs";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { bankFromCheckpoint } from "../src/export";
import { forward } from "../src/forward";
import { writeFixture, readFixture } from "../src/fixture";
import { grayToRgb, readPgm } from "../src/pgm";
import { parseSafetensors, writeSafetensors } from "../src/safetensors";
import { syntheticVgg19 } from "./helpers";

const IMAGE = path.join(__dirname, "..", "assets", "test_image_64.pgm");

function bank(seed = 1) {
  return bankFromCheckpoint(parseSafetensors(writeSafetensors(
    syntheticVgg19(seed))));
}

describe("forward", () => {
  it("zero image with zero means isolates max(bias, 0)", () => {
    const b = bank(11);
    b.channelMeans = [0, 0, 0];
    const acts = forward(b, new Float32Array(3 * 8 * 8), 8, 8, ["conv1_1"]);
    const a = acts.get("conv1_1")!;
    for (let c = 0; c < a.channels; c++) {
      const expected = Math.max(b.layers[0].bias[c], 0);
      for (let i = 0; i < 64; i++) {
        expect(a.data[c * 64 + i]).toBeCloseTo(expected, 6);
      }
    }
  });

  it("produces non-negative activations at pooled resolutions", () => {
    const img = readPgm(fs.readFileSync(IMAGE));
    const acts = forward(bank(12), grayToRgb(img), img.height, img.width,
      ["conv1_1", "conv4_1"]);
    const c1 = acts.get("conv1_1")!;
    const c4 = acts.get("conv4_1")!;
    expect([c1.channels, c1.height, c1.width]).toEqual([64, 64, 64]);
    expect([c4.channels, c4.height, c4.width]).toEqual([512, 8, 8]);
    for (const act of [c1, c4]) {
      let min = Infinity;
      let finite = true;
      for (const v of act.data) {
        min = Math.min(min, v);
        finite = finite && Number.isFinite(v);
      }
      expect(min).toBeGreaterThanOrEqual(0);
      expect(finite).toBe(true);
    }
  }, 120_000);

  it("emits identical fixtures for the same image", () => {
    const img = readPgm(fs.readFileSync(IMAGE));
    const b = bank(13);
    const run = () => {
      const acts = forward(b, grayToRgb(img), img.height, img.width, ["conv1_1"]);
      return writeFixture(new Map([["conv1_1", acts.get("conv1_1")!]]));
    };
    expect(run().equals(run())).toBe(true);
  });

  it("fixture files decode back to the emitted activations", () => {
    const img = readPgm(fs.readFileSync(IMAGE));
    const acts = forward(bank(14), grayToRgb(img), img.height, img.width,
      ["conv1_1"]);
    const fixture = readFixture(writeFixture(
      new Map([["conv1_1", acts.get("conv1_1")!]])));
    const back = fixture.get("conv1_1")!;
    const orig = acts.get("conv1_1")!;
    expect(Buffer.from(back.data.buffer).equals(Buffer.from(orig.data.buffer)))
      .toBe(true);
  });

  it("rejects unknown layers", () => {
    expect(() => forward(bank(15), new Float32Array(3 * 16 * 16), 16, 16,
      ["conv9_9"])).toThrow(/conv9_9/);
  });
});
