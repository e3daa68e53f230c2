/** Per-pixel agreement overlay between the truth and a synthetic mask. */

export type PixelClass = "tp" | "fp" | "fn" | "tn";

/* Fixed legend: yellow TP, light blue FP, green FN, dark blue TN. */
export const PALETTE: Record<PixelClass, [number, number, number, number]> = {
  tp: [255, 255, 0, 255],
  fp: [173, 216, 230, 255],
  fn: [0, 128, 0, 255],
  tn: [0, 0, 139, 255],
};

export class OverlayError extends Error {}

/**
 * Composite two 0/1 layers into an RGBA buffer, one palette color per
 * agreement class. Layers must both match width*height exactly; a
 * mismatch throws before any pixel is produced, so a caller never shows
 * a partial render.
 */
export function renderOverlay(
  truth: Uint8Array,
  synthetic: Uint8Array,
  width: number,
  height: number,
): Uint8ClampedArray<ArrayBuffer> {
  const total = width * height;
  if (truth.length !== total || synthetic.length !== total) {
    throw new OverlayError(
      `layer dimensions disagree: truth ${truth.length} px, ` +
      `synthetic ${synthetic.length} px, frame ${width}x${height}`,
    );
  }
  const rgba = new Uint8ClampedArray(total * 4);
  for (let i = 0; i < total; i++) {
    const cls: PixelClass = truth[i]
      ? (synthetic[i] ? "tp" : "fn")
      : (synthetic[i] ? "fp" : "tn");
    const [r, g, b, a] = PALETTE[cls];
    const o = i * 4;
    rgba[o] = r;
    rgba[o + 1] = g;
    rgba[o + 2] = b;
    rgba[o + 3] = a;
  }
  return rgba;
}

/** Count pixels of each class in a rendered overlay buffer. */
export function countClasses(rgba: Uint8ClampedArray): Record<PixelClass, number> {
  const out: Record<PixelClass, number> = { tp: 0, fp: 0, fn: 0, tn: 0 };
  for (let o = 0; o < rgba.length; o += 4) {
    for (const cls of Object.keys(PALETTE) as PixelClass[]) {
      const [r, g, b, a] = PALETTE[cls];
      if (rgba[o] === r && rgba[o + 1] === g && rgba[o + 2] === b && rgba[o + 3] === a) {
        out[cls] += 1;
        break;
      }
    }
  }
  return out;
}
