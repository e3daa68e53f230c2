/** Application wiring: panel state in the DOM, service round trips, canvas. */

import { ApiClient, ServiceError } from "./api.js";
import type { MetricRow, SessionInfo } from "./api.js";
import { PREVIEW_WINDOW_MS, rateLimit } from "./debounce.js";
import { directionArrow, formatValue } from "./metricTable.js";
import { OverlayError, renderOverlay } from "./overlay.js";
import { decodeRle, foregroundCount } from "./rle.js";
import type { PanelState, SpiculationState } from "./params.js";
import {
  MAX_SPICULATION_ROWS,
  exportState,
  identityState,
  importState,
  toPreviewBody,
  validateState,
} from "./params.js";
import { SEGMENTOR_ROWS, randomizeFromRow } from "./segmentorRows.js";
import { decodePgm, thresholdRgba } from "./truthLayer.js";
import type { TruthLayer } from "./truthLayer.js";

const api = new ApiClient("");

let session: SessionInfo | null = null;
let truth: TruthLayer | null = null;
let state: PanelState = identityState();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const banner = () => $("banner");

function showError(text: string) {
  banner().textContent = text;
  banner().classList.remove("hidden");
}

function clearError() {
  banner().classList.add("hidden");
}

// ---------------------------------------------------------------------------
// upload

async function decodeTruthFile(file: File): Promise<TruthLayer> {
  const name = file.name.toLowerCase();
  if (name.endsWith(".pgm")) {
    return decodePgm(new Uint8Array(await file.arrayBuffer()));
  }
  const bitmap = await createImageBitmap(file);
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  return thresholdRgba(data, bitmap.width, bitmap.height);
}

async function onUpload(file: File) {
  clearError();
  try {
    const [info, layer] = await Promise.all([
      api.createSession(file, file.name),
      decodeTruthFile(file),
    ]);
    if (layer.width !== info.width || layer.height !== info.height ||
        foregroundCount(layer.pixels) !== info.foreground_pixels) {
      throw new Error(
        "local decode of the uploaded file disagrees with the service; " +
        "overlay would be unreliable, not rendering",
      );
    }
    session = info;
    truth = layer;
    $("session-meta").textContent =
      `${info.width}×${info.height}, ${info.foreground_pixels} fg px`;
    schedulePreview();
  } catch (err) {
    session = null;
    truth = null;
    showError(errorText(err));
  }
}

// ---------------------------------------------------------------------------
// preview round trip

function errorText(err: unknown): string {
  if (err instanceof ServiceError) {
    const head = err.stage ? `${err.stage} stage failed: ` : "";
    const tail = err.problems?.length
      ? ` (${err.problems.map((p) => `${p.field}: ${p.message}`).join("; ")})`
      : "";
    return head + err.message + tail;
  }
  return err instanceof Error ? err.message : String(err);
}

async function runPreview() {
  if (!session || !truth) return;
  const problems = validateState(state);
  const list = $("validation");
  list.replaceChildren(
    ...problems.map((p) => {
      const li = document.createElement("li");
      li.textContent = p;
      return li;
    }),
  );
  if (problems.length) return; // invalid state never reaches the service
  try {
    const res = await api.preview(session.session_id, toPreviewBody(state));
    if (res === null) return; // superseded
    clearError();
    paintOverlay(decodeRle(res.mask_rle), res.mask_rle.width, res.mask_rle.height);
    paintMetrics(res.metrics);
  } catch (err) {
    showError(errorText(err));
  }
}

const schedulePreview = rateLimit(() => void runPreview(), PREVIEW_WINDOW_MS);

function paintOverlay(synthetic: Uint8Array, width: number, height: number) {
  if (!truth) return;
  let rgba: Uint8ClampedArray<ArrayBuffer>;
  try {
    rgba = renderOverlay(truth.pixels, synthetic, width, height);
  } catch (err) {
    if (err instanceof OverlayError) {
      showError(errorText(err));
      return; // keep the previous complete frame; never a partial one
    }
    throw err;
  }
  const canvas = $<HTMLCanvasElement>("overlay");
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.putImageData(new ImageData(rgba, width, height), 0, 0);
}

function paintMetrics(rows: MetricRow[]) {
  const tbody = $("metric-rows");
  tbody.replaceChildren(
    ...rows.map((row) => {
      const tr = document.createElement("tr");
      const cells = [row.symbol, directionArrow(row.direction), formatValue(row)];
      for (const text of cells) {
        const td = document.createElement("td");
        td.textContent = text;
        tr.appendChild(td);
      }
      if (row.value === null) tr.classList.add("undefined-metric");
      return tr;
    }),
  );
}

// ---------------------------------------------------------------------------
// panel <-> state

function numberInput(id: string, value: number, onChange: (v: number) => void): HTMLInputElement {
  const input = document.createElement("input");
  input.type = "number";
  input.step = "any";
  input.id = id;
  input.value = String(value);
  input.addEventListener("input", () => {
    onChange(Number(input.value));
    schedulePreview();
  });
  return input;
}

function labeled(text: string, el: HTMLElement): HTMLLabelElement {
  const label = document.createElement("label");
  label.append(text, el);
  return label;
}

function renderSpiculationRows() {
  const host = $("spiculation-rows");
  host.replaceChildren(
    ...state.spiculations.map((sp, i) => spiculationRow(sp, i)),
  );
  $<HTMLButtonElement>("add-spiculation").disabled =
    state.spiculations.length >= MAX_SPICULATION_ROWS;
}

function spiculationRow(sp: SpiculationState, i: number): HTMLElement {
  const row = document.createElement("div");
  row.className = "spiculation-row";
  row.append(
    labeled("center°", numberInput(`sp-c-${i}`, sp.centerDeg, (v) => (sp.centerDeg = v))),
    labeled("height px", numberInput(`sp-h-${i}`, sp.height, (v) => (sp.height = v))),
    labeled("width°", numberInput(`sp-w-${i}`, sp.widthDeg, (v) => (sp.widthDeg = v))),
  );
  const remove = document.createElement("button");
  remove.type = "button";
  remove.textContent = "×";
  remove.title = "remove this spiculation";
  remove.addEventListener("click", () => {
    state.spiculations.splice(i, 1);
    renderSpiculationRows();
    schedulePreview();
  });
  row.appendChild(remove);
  return row;
}

function syncPanelFromState() {
  const set = (id: string, v: number) =>
    ($<HTMLInputElement>(id).value = String(v));
  set("fd-detail", state.fd.detail);
  set("fd-range", state.fd.range);
  set("fd-magnitude", state.fd.magnitude);
  set("af-resize-x", state.affine.resizeX);
  set("af-resize-y", state.affine.resizeY);
  set("af-rotate", state.affine.rotateDeg);
  set("af-shift-dx", state.affine.shiftDx);
  set("af-shift-dy", state.affine.shiftDy);
  set("seed", state.seed);
  renderSpiculationRows();
}

function bindPanel() {
  const bind = (id: string, apply: (v: number) => void) => {
    const input = $<HTMLInputElement>(id);
    input.addEventListener("input", () => {
      apply(Number(input.value));
      schedulePreview();
    });
  };
  bind("fd-detail", (v) => (state.fd.detail = v));
  bind("fd-range", (v) => (state.fd.range = v));
  bind("fd-magnitude", (v) => (state.fd.magnitude = v));
  bind("af-resize-x", (v) => (state.affine.resizeX = v));
  bind("af-resize-y", (v) => (state.affine.resizeY = v));
  bind("af-rotate", (v) => (state.affine.rotateDeg = v));
  bind("af-shift-dx", (v) => (state.affine.shiftDx = v));
  bind("af-shift-dy", (v) => (state.affine.shiftDy = v));
  bind("seed", (v) => (state.seed = v));

  $("add-spiculation").addEventListener("click", () => {
    if (state.spiculations.length >= MAX_SPICULATION_ROWS) return;
    state.spiculations.push({ centerDeg: 0, height: 10, widthDeg: 8 });
    renderSpiculationRows();
    schedulePreview();
  });

  const presetSelect = $<HTMLSelectElement>("preset");
  for (const row of SEGMENTOR_ROWS) {
    const opt = document.createElement("option");
    opt.value = row.id;
    opt.textContent = `#${row.id} ${row.label}`;
    presetSelect.appendChild(opt);
  }
  $("randomize").addEventListener("click", () => {
    const row = SEGMENTOR_ROWS.find((r) => r.id === presetSelect.value);
    if (!row) return;
    state = randomizeFromRow(row, Math.random);
    syncPanelFromState();
    schedulePreview();
  });

  $("reset").addEventListener("click", () => {
    state = identityState();
    syncPanelFromState();
    schedulePreview();
  });
}

// ---------------------------------------------------------------------------
// import / export

function bindTransfer() {
  $("export-state").addEventListener("click", () => {
    download("panel-state.json", new Blob([exportState(state)], { type: "application/json" }));
  });

  const importInput = $<HTMLInputElement>("import-state");
  importInput.addEventListener("change", async () => {
    const file = importInput.files?.[0];
    importInput.value = "";
    if (!file) return;
    try {
      state = importState(await file.text());
      clearError();
      syncPanelFromState();
      schedulePreview();
    } catch (err) {
      showError(errorText(err));
    }
  });

  $("export-zip").addEventListener("click", async () => {
    if (!session) return;
    const problems = validateState(state);
    if (problems.length) {
      showError(`cannot export: ${problems.join("; ")}`);
      return;
    }
    try {
      const blob = await api.exportZip(session.session_id, toPreviewBody(state));
      download("export.zip", blob);
    } catch (err) {
      showError(errorText(err));
    }
  });
}

function download(filename: string, blob: Blob) {
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = filename;
  a.click();
  URL.revokeObjectURL(a.href);
}

// ---------------------------------------------------------------------------
// boot

function boot() {
  const upload = $<HTMLInputElement>("upload");
  upload.addEventListener("change", () => {
    const file = upload.files?.[0];
    if (file) void onUpload(file);
  });

  const zoom = $<HTMLInputElement>("zoom");
  zoom.addEventListener("input", () => {
    $("overlay").style.transform = `scale(${zoom.value})`;
  });

  bindPanel();
  bindTransfer();
  syncPanelFromState();
}

boot();
