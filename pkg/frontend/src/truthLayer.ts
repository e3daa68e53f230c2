/**
 * Client-side decode of the uploaded truth image into a 0/1 layer.
 *
 * The overlay needs the truth raster, which the service does not ship
 * back; the user's own uploaded file is decoded locally with the same
 * rule the service applies (grayscale value strictly above 127 is
 * foreground) and cross-checked against the session's reported
 * foreground count before anything is rendered.
 */

export interface TruthLayer {
  width: number;
  height: number;
  pixels: Uint8Array;
}

export const FOREGROUND_THRESHOLD = 127;

/** Binary PGM (P5, maxval <= 255). Throws on anything else. */
export function decodePgm(bytes: Uint8Array): TruthLayer {
  let pos = 0;
  const token = (): string => {
    // skip whitespace and # comments between header fields
    for (;;) {
      while (pos < bytes.length && isSpace(bytes[pos]!)) pos++;
      if (bytes[pos] === 0x23) {
        while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
        continue;
      }
      break;
    }
    const start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos]!)) pos++;
    return String.fromCharCode(...bytes.subarray(start, pos));
  };
  if (token() !== "P5") throw new Error("not a binary PGM file");
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0) || !(height > 0)) throw new Error("bad PGM dimensions");
  if (!(maxval > 0) || maxval > 255) throw new Error(`unsupported PGM maxval ${maxval}`);
  pos++; // single whitespace byte separates header from raster
  const raster = bytes.subarray(pos, pos + width * height);
  if (raster.length !== width * height) throw new Error("truncated PGM raster");
  const pixels = new Uint8Array(width * height);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = raster[i]! > FOREGROUND_THRESHOLD ? 1 : 0;
  }
  return { width, height, pixels };
}

const isSpace = (b: number) => b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;

/** Threshold canvas RGBA (decoded PNG) into a 0/1 layer. */
export function thresholdRgba(data: Uint8ClampedArray, width: number, height: number): TruthLayer {
  const pixels = new Uint8Array(width * height);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = data[i * 4]! > FOREGROUND_THRESHOLD ? 1 : 0;
  }
  return { width, height, pixels };
}
