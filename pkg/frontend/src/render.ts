import type { Point } from "./layout.js";
import type { ViewModel } from "./viewmodel.js";
import type { JobRound } from "./types.js";
import { epsilonCurve } from "./viewmodel.js";

/**
 * Pure string renderers: everything the console draws is produced as
 * markup here (testable without a DOM) and only attached to the page by
 * the thin mount helpers below.
 */

export function graphSvg(vm: ViewModel, pos: Point[], size = 640): string {
  const parts: string[] = [
    `<svg viewBox="0 0 ${size} ${size}" xmlns="http://www.w3.org/2000/svg">`,
  ];
  for (const [u, v] of vm.edges) {
    const cut = vm.isSevered(u, v);
    parts.push(
      `<line x1="${px(pos[u].x, size)}" y1="${px(pos[u].y, size)}" ` +
        `x2="${px(pos[v].x, size)}" y2="${px(pos[v].y, size)}" ` +
        `stroke="${cut ? "#ccc" : "#888"}"` +
        (cut ? ` stroke-dasharray="4 3" class="severed"` : "") +
        ` />`,
    );
  }
  for (let v = 0; v < vm.n; v++) {
    const badge = vm.isQuarantined(v);
    parts.push(
      `<circle data-vertex="${v}" cx="${px(pos[v].x, size)}" cy="${px(pos[v].y, size)}" ` +
        `r="7" fill="${vm.colorFor(v)}" ` +
        `stroke="${badge ? "#1565c0" : "#333"}" stroke-width="${badge ? 3 : 1}"` +
        (badge ? ` class="quarantined"` : "") +
        ` />`,
    );
  }
  parts.push("</svg>");
  return parts.join("\n");
}

/** Polyline of cumulative epsilon per round for the federated panel. */
export function epsilonCurveSvg(rounds: JobRound[], width = 320, height = 120): string {
  const curve = epsilonCurve(rounds);
  if (curve.length === 0) {
    return `<svg viewBox="0 0 ${width} ${height}"><text x="8" y="20">no rounds yet</text></svg>`;
  }
  const max = curve[curve.length - 1] || 1;
  const pts = curve
    .map((eps, i) => {
      const x = curve.length === 1 ? width / 2 : (i / (curve.length - 1)) * (width - 20) + 10;
      const y = height - 10 - (eps / max) * (height - 30);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  return (
    `<svg viewBox="0 0 ${width} ${height}" data-epsilons="${curve.map((e) => e.toString()).join(";")}">` +
    `<polyline points="${pts}" fill="none" stroke="#6a1b9a" stroke-width="2" />` +
    `<text x="8" y="14">eps after ${curve.length} rounds: ${curve[curve.length - 1].toFixed(3)}</text>` +
    `</svg>`
  );
}

export function statusBanner(vm: ViewModel): string {
  if (vm.connection === "live") return "";
  const text = {
    reconnecting: "connection lost — resubscribing from last event…",
    polling: "event stream unavailable — polling",
    stopped: "disconnected",
  }[vm.connection];
  return `<div class="banner banner-${vm.connection}">${text}</div>`;
}

export function countsLine(vm: ViewModel): string {
  const c = vm.counts;
  return `t=${vm.t}  S=${c.S} D=${c.D} I=${c.I} R=${c.R}` + (vm.finished ? "  (finished)" : "");
}

function px(unit: number, size: number): string {
  return (unit * size).toFixed(1);
}

/* -- DOM mounting (no-ops outside a browser) -------------------------------- */

export function mount(el: unknown, markup: string): void {
  if (typeof document === "undefined" || el === null || el === undefined) return;
  (el as HTMLElement).innerHTML = markup;
}

export function byId(id: string): HTMLElement | null {
  if (typeof document === "undefined") return null;
  return document.getElementById(id);
}
