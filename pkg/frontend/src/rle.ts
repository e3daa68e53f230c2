/** Run-length mask payloads as the service ships them. */

export interface RleMask {
  width: number;
  height: number;
  counts: number[];
}

/**
 * Decode to one byte per pixel (0 background, 1 foreground), row-major.
 *
 * Runs alternate starting with background; counts[0] is 0 when the first
 * pixel is foreground. The counts must be non-negative integers summing
 * to width*height.
 */
export function decodeRle(rle: RleMask): Uint8Array {
  const { width, height, counts } = rle;
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new Error(`bad mask dimensions ${width}x${height}`);
  }
  const total = width * height;
  let sum = 0;
  for (const c of counts) {
    if (!Number.isInteger(c) || c < 0) {
      throw new Error(`run lengths must be non-negative integers, got ${c}`);
    }
    sum += c;
  }
  if (sum !== total) {
    throw new Error(`run lengths cover ${sum} pixels, frame has ${total}`);
  }
  const pixels = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const c of counts) {
    if (value) pixels.fill(1, pos, pos + c);
    pos += c;
    value ^= 1;
  }
  return pixels;
}

/** Foreground pixel count of a decoded layer. */
export function foregroundCount(pixels: Uint8Array): number {
  let n = 0;
  for (let i = 0; i < pixels.length; i++) n += pixels[i]!;
  return n;
}
