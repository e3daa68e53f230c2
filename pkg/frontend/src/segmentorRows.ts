/**
 * The ten built-in segmentor presets and the "randomize within a preset"
 * convenience: ranges are drawn client-side into concrete panel values,
 * then previewed through the service like any other state.
 */

import type { PanelState, SpiculationState } from "./params.js";
import { identityState } from "./params.js";

export type SpiculationMode = "outward" | "inward" | "mixture";

export interface SegmentorRow {
  id: string;
  label: string;
  fd: { detail: number; range: number; magnitude: number };
  resize: [number, number];
  /** [lo, hi] displacement magnitude in pixels; [0, 0] for none. */
  shift: [number, number];
  spiculation: {
    count: [number, number];
    height: [number, number];
    widthDeg: [number, number];
    mode: SpiculationMode;
  } | null;
}

const FD_SMOOTH = { detail: 0.1, range: 0.08, magnitude: 2.0 };
const FD_ROUGH = { detail: 0.1, range: 0.08, magnitude: 8.0 };
const SPICULE = {
  count: [1, 5] as [number, number],
  height: [3.0, 25.0] as [number, number],
  widthDeg: [3.0, 10.0] as [number, number],
};

export const SEGMENTOR_ROWS: SegmentorRow[] = [
  { id: "1", label: "Smooth boundary", fd: FD_SMOOTH, resize: [1.0, 1.0], shift: [0, 0], spiculation: null },
  { id: "2", label: "Rough boundary", fd: FD_ROUGH, resize: [1.0, 1.0], shift: [0, 0], spiculation: null },
  { id: "3", label: "Rough + shifted", fd: FD_ROUGH, resize: [1.0, 1.0], shift: [5, 20], spiculation: null },
  { id: "4", label: "Oversize 110%", fd: FD_SMOOTH, resize: [1.1, 1.1], shift: [0, 0], spiculation: null },
  { id: "5", label: "Undersize 85%", fd: FD_SMOOTH, resize: [0.85, 0.85], shift: [0, 0], spiculation: null },
  { id: "6", label: "Oversize + shifted", fd: FD_SMOOTH, resize: [1.1, 1.1], shift: [5, 20], spiculation: null },
  { id: "7", label: "Undersize + shifted", fd: FD_SMOOTH, resize: [0.85, 0.85], shift: [5, 20], spiculation: null },
  { id: "8", label: "Outward spiculations", fd: FD_SMOOTH, resize: [1.0, 1.0], shift: [0, 0], spiculation: { ...SPICULE, mode: "outward" } },
  { id: "9", label: "Inward spiculations", fd: FD_SMOOTH, resize: [1.0, 1.0], shift: [0, 0], spiculation: { ...SPICULE, mode: "inward" } },
  { id: "10", label: "Mixed spiculations", fd: FD_SMOOTH, resize: [1.0, 1.0], shift: [0, 0], spiculation: { ...SPICULE, mode: "mixture" } },
];

const uniform = (rand: () => number, lo: number, hi: number) => lo + rand() * (hi - lo);

/**
 * Draw one concrete panel state from a preset's ranges.
 *
 * Shift is a magnitude range realized on a random direction; mixture
 * spiculations draw a height magnitude and then a fair-coin sign.
 */
export function randomizeFromRow(row: SegmentorRow, rand: () => number): PanelState {
  const s = identityState();
  s.fd = { ...row.fd };
  s.affine.resizeX = row.resize[0];
  s.affine.resizeY = row.resize[1];
  const [lo, hi] = row.shift;
  if (hi > 0) {
    const angle = uniform(rand, 0, 2 * Math.PI);
    const length = uniform(rand, lo, hi);
    s.affine.shiftDx = length * Math.cos(angle);
    s.affine.shiftDy = length * Math.sin(angle);
  }
  if (row.spiculation) {
    const sp = row.spiculation;
    const n = Math.floor(uniform(rand, sp.count[0], sp.count[1] + 1));
    const rows: SpiculationState[] = [];
    for (let i = 0; i < Math.min(n, 5); i++) {
      let height = uniform(rand, sp.height[0], sp.height[1]);
      if (sp.mode === "inward") height = -height;
      else if (sp.mode === "mixture" && rand() < 0.5) height = -height;
      rows.push({
        centerDeg: uniform(rand, 0, 360),
        height,
        widthDeg: uniform(rand, sp.widthDeg[0], sp.widthDeg[1]),
      });
    }
    s.spiculations = rows;
  }
  return s;
}
