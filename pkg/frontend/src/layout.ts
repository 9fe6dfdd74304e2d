export interface Point {
  x: number;
  y: number;
}

/** Small deterministic PRNG (mulberry32) so layouts are stable across
 * reloads for the same scenario seed. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * Force-directed layout: seeded circle start, then spring forces along
 * edges and pairwise repulsion, cooled over a fixed iteration count.
 * Output is normalized to the [0, 1] square.
 */
export function forceLayout(
  n: number,
  edges: number[][],
  seed: number,
  iterations = 150,
): Point[] {
  if (n < 1) return [];
  const rand = mulberry32(seed);
  const pos: Point[] = [];
  for (let v = 0; v < n; v++) {
    const angle = (2 * Math.PI * v) / n;
    pos.push({
      x: Math.cos(angle) + 0.1 * (rand() - 0.5),
      y: Math.sin(angle) + 0.1 * (rand() - 0.5),
    });
  }
  const area = 4.0;
  const k = Math.sqrt(area / n); // ideal spring length
  for (let iter = 0; iter < iterations; iter++) {
    const temp = 0.1 * (1 - iter / iterations) + 0.005;
    const disp: Point[] = pos.map(() => ({ x: 0, y: 0 }));
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        let dx = pos[i].x - pos[j].x;
        let dy = pos[i].y - pos[j].y;
        let d2 = dx * dx + dy * dy;
        if (d2 < 1e-9) {
          // nudge coincident points apart deterministically
          dx = 1e-4 * (i - j);
          dy = 1e-4;
          d2 = dx * dx + dy * dy;
        }
        const rep = (k * k) / d2;
        disp[i].x += dx * rep;
        disp[i].y += dy * rep;
        disp[j].x -= dx * rep;
        disp[j].y -= dy * rep;
      }
    }
    for (const [u, v] of edges) {
      const dx = pos[u].x - pos[v].x;
      const dy = pos[u].y - pos[v].y;
      const d = Math.sqrt(dx * dx + dy * dy) || 1e-9;
      const att = (d * d) / k / d;
      disp[u].x -= dx * att;
      disp[u].y -= dy * att;
      disp[v].x += dx * att;
      disp[v].y += dy * att;
    }
    for (let v = 0; v < n; v++) {
      const d = Math.sqrt(disp[v].x ** 2 + disp[v].y ** 2) || 1e-9;
      const step = Math.min(d, temp);
      pos[v].x += (disp[v].x / d) * step;
      pos[v].y += (disp[v].y / d) * step;
    }
  }
  // normalize into the unit square with a small margin
  const xs = bounds(pos.map((p) => p.x));
  const ys = bounds(pos.map((p) => p.y));
  return pos.map((p) => ({
    x: 0.05 + (0.9 * (p.x - xs.lo)) / (xs.hi - xs.lo || 1),
    y: 0.05 + (0.9 * (p.y - ys.lo)) / (ys.hi - ys.lo || 1),
  }));
}

function bounds(values: number[]): { lo: number; hi: number } {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return { lo, hi };
}
