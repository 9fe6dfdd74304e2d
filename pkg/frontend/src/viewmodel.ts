import { EventBuffer } from "./events.js";
import type {
  ActionJson,
  Counts,
  CreateScenarioResponse,
  EventRecord,
  ForecastPayload,
  JobRound,
  ScenarioView,
  StatePayload,
} from "./types.js";

export type Channel = "compartment" | "anomaly" | "risk" | "forecast";
export type Connection = "live" | "reconnecting" | "polling" | "stopped";

export const COMPARTMENT_COLORS = ["#4caf50", "#ff9800", "#f44336", "#607d8b"];
const COMPARTMENT_NAMES = ["S", "D", "I", "R"];

/** Map a [0,1] intensity to a white->red hex ramp. */
export function heatColor(value: number): string {
  const v = Math.max(0, Math.min(1, value));
  const other = Math.round(235 * (1 - v) + 20);
  const hex = (x: number) => x.toString(16).padStart(2, "0");
  return `#ff${hex(other)}${hex(other)}`;
}

export interface PendingAction {
  kind: "quarantine" | "sever" | "restore";
  vertex?: number;
  edge?: number[];
  duration?: number;
}

/**
 * Everything the console renders, reconstructed purely from service
 * responses and the ordered event stream.  No security logic lives here:
 * scores, compartments and plans come from the server as-is.
 */
export class ViewModel {
  scenarioId = "";
  n = 0;
  edges: number[][] = [];
  horizon = 0;
  t = 0;
  counts: Counts = { S: 0, D: 0, I: 0, R: 0 };
  compartments: number[] = [];
  quarantined = new Set<number>();
  severed = new Set<string>();
  finished = false;
  active = false;

  channel: Channel = "compartment";
  anomaly: number[] = [];
  risk: number[] = [];
  forecastFrames: { t: number; scores: number[] }[] = [];
  forecastFrame = 0;

  connection: Connection = "stopped";
  pendingAction: PendingAction | null = null;

  /** transmissions observed per step event, keyed by step t */
  transmissionsByStep = new Map<number, number>();
  /** applied event kinds in arrival order, for debugging/inspection */
  eventLog: { seq: number; kind: string; t: number }[] = [];

  private buffer = new EventBuffer((r) => this.applyEvent(r));

  get cursor(): number {
    return this.buffer.cursor;
  }

  get bufferedEvents(): number {
    return this.buffer.pendingCount;
  }

  loadScenario(created: CreateScenarioResponse): void {
    this.scenarioId = created.scenario_id;
    this.n = created.n;
    this.edges = created.edges.map((e) => [...e]);
    this.horizon = created.horizon;
    this.t = created.t;
    this.applyView(created);
  }

  /** Feed one raw event from the stream; ordering is handled internally. */
  ingest(record: EventRecord): void {
    this.buffer.push(record);
  }

  private applyEvent(record: EventRecord): void {
    this.eventLog.push({ seq: record.seq, kind: record.kind, t: record.t });
    this.t = record.t;
    this.applyView(record);
    if (record.kind === "created" && record.n !== undefined) {
      this.n = record.n;
    }
    if (record.kind === "step") {
      this.transmissionsByStep.set(record.t, record.transmissions?.length ?? 0);
    }
  }

  private applyView(view: ScenarioView): void {
    this.counts = { ...view.counts };
    this.compartments = [...view.compartments];
    this.quarantined = new Set(view.quarantined);
    this.severed = new Set(view.severed.map(([u, v]) => `${u}-${v}`));
    this.finished = view.finished;
    this.active = view.active;
  }

  /** Merge a full state payload (anomaly heatmap, risk channel). */
  applyState(state: StatePayload): void {
    this.t = state.t;
    this.n = state.n;
    this.applyView(state);
    this.anomaly = [...state.anomaly];
    this.risk = [...state.scores.risk];
  }

  applyForecast(payload: ForecastPayload): void {
    this.forecastFrames = payload.frames.map((f) => ({
      t: f.t,
      scores: [...f.scores],
    }));
    this.forecastFrame = 0;
  }

  selectForecastFrame(i: number): void {
    if (i < 0 || i >= this.forecastFrames.length) {
      throw new Error(`forecast frame ${i} out of range 0..${this.forecastFrames.length - 1}`);
    }
    this.forecastFrame = i;
  }

  compartmentName(v: number): string {
    return COMPARTMENT_NAMES[this.compartments[v]] ?? "?";
  }

  isQuarantined(v: number): boolean {
    return this.quarantined.has(v);
  }

  isSevered(u: number, v: number): boolean {
    const key = u < v ? `${u}-${v}` : `${v}-${u}`;
    return this.severed.has(key);
  }

  /** Per-vertex fill color under the selected channel. */
  colorFor(v: number): string {
    switch (this.channel) {
      case "compartment":
        return COMPARTMENT_COLORS[this.compartments[v]] ?? "#999999";
      case "anomaly":
        return heatColor(this.anomaly[v] ?? 0);
      case "risk":
        return heatColor(this.risk[v] ?? 0);
      case "forecast": {
        const frame = this.forecastFrames[this.forecastFrame];
        return heatColor(frame ? (frame.scores[v] ?? 0) : 0);
      }
    }
  }

  /** Click-to-act selection; the palette turns this into a POSTable action. */
  selectAction(action: PendingAction): void {
    this.pendingAction = action;
  }

  takePendingAction(): ActionJson {
    const p = this.pendingAction;
    if (p === null) throw new Error("no action selected");
    this.pendingAction = null;
    return {
      kind: p.kind,
      vertex: p.vertex ?? null,
      edge: p.edge ?? null,
      duration: p.duration ?? 1,
      cost: 1.0,
      implement_time: 0,
    };
  }

  totalTransmissions(): number {
    let total = 0;
    for (const c of this.transmissionsByStep.values()) total += c;
    return total;
  }
}

/**
 * Privacy-ledger curve for the federated panel: cumulative epsilon per
 * round, in round order.  The ledger never forgets, so a decreasing
 * value means the records are corrupt — surface that loudly.
 */
export function epsilonCurve(rounds: JobRound[]): number[] {
  const sorted = [...rounds].sort((a, b) => a.round - b.round);
  const curve = sorted.map((r) => r.epsilon);
  for (let i = 1; i < curve.length; i++) {
    if (curve[i] < curve[i - 1]) {
      throw new Error(
        `epsilon decreased between rounds ${sorted[i - 1].round} and ${sorted[i].round}`,
      );
    }
  }
  return curve;
}
