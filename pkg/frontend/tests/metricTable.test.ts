import { describe, expect, it } from "vitest";
import { directionArrow, formatValue } from "../src/metricTable.js";

describe("directionArrow", () => {
  it("points up when larger is better and down otherwise", () => {
    expect(directionArrow("+")).toBe("↑");
    expect(directionArrow("-")).toBe("↓");
  });
});

describe("formatValue", () => {
  it("renders defined values to four decimals", () => {
    expect(formatValue({ symbol: "DICE", direction: "+", value: 0.90909 })).toBe("0.9091");
    expect(formatValue({ symbol: "PBD", direction: "-", value: -1 })).toBe("-1.0000");
  });

  it("renders undefined metrics with their reason", () => {
    expect(formatValue({ symbol: "ICC", direction: "+", value: null, reason: "zero variance" }))
      .toBe("undefined (zero variance)");
    expect(formatValue({ symbol: "ICC", direction: "+", value: null })).toBe("undefined");
  });
});
