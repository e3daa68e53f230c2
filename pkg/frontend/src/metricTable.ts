/** Display helpers for the 20-metric readout. */

import type { MetricRow } from "./api.js";

/** Up arrow when larger is better, down arrow when smaller is. */
export function directionArrow(direction: "+" | "-"): string {
  return direction === "+" ? "↑" : "↓";
}

/** Fixed-width value text; undefined metrics show a reason instead. */
export function formatValue(row: MetricRow): string {
  if (row.value === null) {
    return row.reason ? `undefined (${row.reason})` : "undefined";
  }
  return row.value.toFixed(4);
}
