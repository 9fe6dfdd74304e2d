import { describe, expect, it } from "vitest";

import { forceLayout, mulberry32 } from "../src/layout.js";

const EDGES = [
  [0, 1],
  [1, 2],
  [2, 3],
  [3, 0],
  [0, 2],
];

describe("mulberry32", () => {
  it("is deterministic per seed and uniform-ish in [0,1)", () => {
    const a = mulberry32(42);
    const b = mulberry32(42);
    const seqA = Array.from({ length: 10 }, () => a());
    const seqB = Array.from({ length: 10 }, () => b());
    expect(seqA).toEqual(seqB);
    for (const x of seqA) {
      expect(x).toBeGreaterThanOrEqual(0);
      expect(x).toBeLessThan(1);
    }
    expect(new Set(seqA).size).toBe(10);
  });
});

describe("forceLayout", () => {
  it("is stable across calls for the same seed", () => {
    const a = forceLayout(4, EDGES, 7);
    const b = forceLayout(4, EDGES, 7);
    expect(a).toEqual(b);
  });

  it("changes with the seed", () => {
    const a = forceLayout(4, EDGES, 7);
    const b = forceLayout(4, EDGES, 8);
    expect(a).not.toEqual(b);
  });

  it("keeps every vertex inside the unit square", () => {
    const pos = forceLayout(30, EDGES, 3);
    for (const p of pos) {
      expect(p.x).toBeGreaterThanOrEqual(0);
      expect(p.x).toBeLessThanOrEqual(1);
      expect(p.y).toBeGreaterThanOrEqual(0);
      expect(p.y).toBeLessThanOrEqual(1);
      expect(Number.isFinite(p.x)).toBe(true);
      expect(Number.isFinite(p.y)).toBe(true);
    }
  });

  it("separates connected pairs less than the graph diameter on a path", () => {
    // path 0-1-2-3-4: endpoints should land farther apart than neighbors
    const edges = [
      [0, 1],
      [1, 2],
      [2, 3],
      [3, 4],
    ];
    const pos = forceLayout(5, edges, 11, 300);
    const d = (i: number, j: number) =>
      Math.hypot(pos[i].x - pos[j].x, pos[i].y - pos[j].y);
    expect(d(0, 4)).toBeGreaterThan(d(0, 1));
    expect(d(0, 4)).toBeGreaterThan(d(3, 4));
  });
});
