import { describe, expect, it } from "vitest";
import { validateState } from "../src/params.js";
import { SEGMENTOR_ROWS, randomizeFromRow } from "../src/segmentorRows.js";

/** Small deterministic generator so draws are reproducible. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("SEGMENTOR_ROWS", () => {
  it("lists the ten built-in presets once each", () => {
    expect(SEGMENTOR_ROWS.map((r) => r.id)).toEqual(
      ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10"],
    );
  });
});

describe("randomizeFromRow", () => {
  it("always produces a state that passes validation", () => {
    const rand = mulberry32(7);
    for (const row of SEGMENTOR_ROWS) {
      for (let k = 0; k < 25; k++) {
        expect(validateState(randomizeFromRow(row, rand))).toEqual([]);
      }
    }
  });

  it("copies the preset's fixed boundary and resize settings", () => {
    const rand = mulberry32(11);
    for (const row of SEGMENTOR_ROWS) {
      const s = randomizeFromRow(row, rand);
      expect(s.fd).toEqual(row.fd);
      expect([s.affine.resizeX, s.affine.resizeY]).toEqual(row.resize);
    }
  });

  it("draws shifted presets inside their displacement range", () => {
    const rand = mulberry32(13);
    for (const row of SEGMENTOR_ROWS.filter((r) => r.shift[1] > 0)) {
      for (let k = 0; k < 50; k++) {
        const s = randomizeFromRow(row, rand);
        const length = Math.hypot(s.affine.shiftDx, s.affine.shiftDy);
        expect(length).toBeGreaterThanOrEqual(row.shift[0]);
        expect(length).toBeLessThanOrEqual(row.shift[1]);
      }
    }
  });

  it("leaves unshifted presets at the origin", () => {
    const rand = mulberry32(17);
    for (const row of SEGMENTOR_ROWS.filter((r) => r.shift[1] === 0)) {
      const s = randomizeFromRow(row, rand);
      expect(s.affine.shiftDx).toBe(0);
      expect(s.affine.shiftDy).toBe(0);
    }
  });

  it("draws spiculation rows inside the preset ranges with the right signs", () => {
    const rand = mulberry32(19);
    const signs = { outward: new Set<number>(), inward: new Set<number>(), mixture: new Set<number>() };
    for (const row of SEGMENTOR_ROWS.filter((r) => r.spiculation)) {
      const sp = row.spiculation!;
      for (let k = 0; k < 60; k++) {
        const s = randomizeFromRow(row, rand);
        expect(s.spiculations.length).toBeGreaterThanOrEqual(sp.count[0]);
        expect(s.spiculations.length).toBeLessThanOrEqual(sp.count[1]);
        for (const drawn of s.spiculations) {
          expect(drawn.centerDeg).toBeGreaterThanOrEqual(0);
          expect(drawn.centerDeg).toBeLessThan(360);
          expect(Math.abs(drawn.height)).toBeGreaterThanOrEqual(sp.height[0]);
          expect(Math.abs(drawn.height)).toBeLessThanOrEqual(sp.height[1]);
          expect(drawn.widthDeg).toBeGreaterThanOrEqual(sp.widthDeg[0]);
          expect(drawn.widthDeg).toBeLessThanOrEqual(sp.widthDeg[1]);
          signs[sp.mode].add(Math.sign(drawn.height));
        }
      }
    }
    expect(signs.outward).toEqual(new Set([1]));
    expect(signs.inward).toEqual(new Set([-1]));
    expect(signs.mixture).toEqual(new Set([1, -1])); // both directions occur
  });

  it("never exceeds the panel's spiculation row cap", () => {
    const rand = mulberry32(23);
    for (const row of SEGMENTOR_ROWS.filter((r) => r.spiculation)) {
      for (let k = 0; k < 40; k++) {
        expect(randomizeFromRow(row, rand).spiculations.length).toBeLessThanOrEqual(5);
      }
    }
  });
});
