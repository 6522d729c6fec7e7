import { describe, expect, it } from "vitest";

import { colorFor, knownIds, textColorFor } from "../src/palette.js";

describe("palette", () => {
  it("covers the eight symbol ids the service can emit", () => {
    expect(knownIds().length).toBe(8);
    for (let i = 1; i <= 8; i++) {
      expect(knownIds()).toContain(`COLOR${i}`);
    }
  });

  it("assigns each id a distinct hex color", () => {
    const seen = new Set(knownIds().map((id) => colorFor(id)));
    expect(seen.size).toBe(8);
    for (const hex of seen) expect(hex).toMatch(/^#[0-9A-Fa-f]{6}$/);
  });

  it("falls back to grey for unknown ids", () => {
    expect(colorFor("COLOR99")).toBe("#999999");
  });

  it("uses light text on dark fills", () => {
    expect(textColorFor("COLOR8")).toBe("#ffffff");
    expect(textColorFor("COLOR4")).toBe("#111111");
  });
});
