/**
 * Parameter panel state: validation, service-body mapping, and the
 * export/import round trip.
 *
 * Validation mirrors the service's rules so a request that would be
 * rejected server-side is blocked before it is sent. The one extra
 * client-side rule: seeds stay within JavaScript's safe-integer range.
 */

export interface FdState {
  detail: number;
  range: number;
  magnitude: number;
}

export interface SpiculationState {
  centerDeg: number;
  height: number;
  widthDeg: number;
}

export interface AffineState {
  resizeX: number;
  resizeY: number;
  rotateDeg: number;
  shiftDx: number;
  shiftDy: number;
}

export interface PanelState {
  seed: number;
  fd: FdState;
  spiculations: SpiculationState[];
  affine: AffineState;
}

export const MAX_SPICULATION_ROWS = 5;

/** The identity pipeline: preview returns the round-tripped truth. */
export function identityState(): PanelState {
  return {
    seed: 0,
    fd: { detail: 1.0, range: 0.0, magnitude: 0.0 },
    spiculations: [],
    affine: { resizeX: 1.0, resizeY: 1.0, rotateDeg: 0.0, shiftDx: 0.0, shiftDy: 0.0 },
  };
}

const fin = (v: unknown): v is number => typeof v === "number" && Number.isFinite(v);

/** Problems as "field path: message" strings; empty means valid. */
export function validateState(s: PanelState): string[] {
  const out: string[] = [];
  const need = (ok: boolean, field: string, msg: string) => {
    if (!ok) out.push(`${field}: ${msg}`);
  };

  need(Number.isSafeInteger(s.seed) && s.seed >= 0, "seed",
       "must be an integer between 0 and 2^53-1");

  need(fin(s.fd.detail) && s.fd.detail > 0 && s.fd.detail <= 1, "fd.detail",
       "must be in (0, 1]");
  need(fin(s.fd.range) && s.fd.range >= 0 && s.fd.range <= 1, "fd.range",
       "must be in [0, 1]");
  need(fin(s.fd.magnitude) && s.fd.magnitude >= 0, "fd.magnitude",
       "must be >= 0");

  need(s.spiculations.length <= MAX_SPICULATION_ROWS, "spiculations",
       `at most ${MAX_SPICULATION_ROWS} rows`);
  s.spiculations.forEach((sp, i) => {
    need(fin(sp.centerDeg), `spiculations[${i}].centerDeg`, "must be a finite angle");
    need(fin(sp.height), `spiculations[${i}].height`, "must be a finite pixel offset");
    need(fin(sp.widthDeg) && sp.widthDeg > 0, `spiculations[${i}].widthDeg`,
         "must be > 0");
  });

  need(fin(s.affine.resizeX) && s.affine.resizeX > 0, "affine.resizeX", "must be > 0");
  need(fin(s.affine.resizeY) && s.affine.resizeY > 0, "affine.resizeY", "must be > 0");
  need(fin(s.affine.rotateDeg), "affine.rotateDeg", "must be finite");
  need(fin(s.affine.shiftDx), "affine.shiftDx", "must be finite");
  need(fin(s.affine.shiftDy), "affine.shiftDy", "must be finite");
  return out;
}

/** Service request body for /sessions/{id}/preview and /export. */
export function toPreviewBody(s: PanelState): object {
  return {
    seed: s.seed,
    fd: {
      detail: s.fd.detail,
      range: s.fd.range,
      magnitude: s.fd.magnitude,
    },
    spiculations: s.spiculations.map((sp) => ({
      center_deg: sp.centerDeg,
      height: sp.height,
      width_deg: sp.widthDeg,
    })),
    affine: {
      resize_x: s.affine.resizeX,
      resize_y: s.affine.resizeY,
      rotate_deg: s.affine.rotateDeg,
      shift_dx: s.affine.shiftDx,
      shift_dy: s.affine.shiftDy,
    },
  };
}

export function exportState(s: PanelState): string {
  return JSON.stringify(s, null, 2);
}

/** Parse and validate exported state; throws listing every problem. */
export function importState(text: string): PanelState {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new Error("import failed: not valid JSON");
  }
  const s = coerceState(raw);
  const problems = validateState(s);
  if (problems.length) {
    throw new Error(`import failed: ${problems.join("; ")}`);
  }
  return s;
}

function coerceState(raw: unknown): PanelState {
  if (typeof raw !== "object" || raw === null) {
    throw new Error("import failed: expected a JSON object");
  }
  const o = raw as Record<string, unknown>;
  const fd = asRecord(o.fd, "fd");
  const affine = asRecord(o.affine, "affine");
  const spics = Array.isArray(o.spiculations) ? o.spiculations : missing("spiculations");
  return {
    seed: asNumber(o.seed, "seed"),
    fd: {
      detail: asNumber(fd.detail, "fd.detail"),
      range: asNumber(fd.range, "fd.range"),
      magnitude: asNumber(fd.magnitude, "fd.magnitude"),
    },
    spiculations: spics.map((sp, i) => {
      const r = asRecord(sp, `spiculations[${i}]`);
      return {
        centerDeg: asNumber(r.centerDeg, `spiculations[${i}].centerDeg`),
        height: asNumber(r.height, `spiculations[${i}].height`),
        widthDeg: asNumber(r.widthDeg, `spiculations[${i}].widthDeg`),
      };
    }),
    affine: {
      resizeX: asNumber(affine.resizeX, "affine.resizeX"),
      resizeY: asNumber(affine.resizeY, "affine.resizeY"),
      rotateDeg: asNumber(affine.rotateDeg, "affine.rotateDeg"),
      shiftDx: asNumber(affine.shiftDx, "affine.shiftDx"),
      shiftDy: asNumber(affine.shiftDy, "affine.shiftDy"),
    },
  };
}

function missing(field: string): never {
  throw new Error(`import failed: missing ${field}`);
}

function asRecord(v: unknown, field: string): Record<string, unknown> {
  if (typeof v !== "object" || v === null || Array.isArray(v)) missing(field);
  return v as Record<string, unknown>;
}

function asNumber(v: unknown, field: string): number {
  if (typeof v !== "number") missing(field);
  return v as number;
}
