/** Wire types for the defense service's JSON API (schema_version 1). */

export type Kind = "created" | "step" | "action";

export interface Counts {
  S: number;
  D: number;
  I: number;
  R: number;
}

/** Snapshot fields every mutation event and response carries. */
export interface ScenarioView {
  counts: Counts;
  compartments: number[];
  quarantined: number[];
  severed: number[][];
  finished: boolean;
  active: boolean;
}

export interface ActionJson {
  kind: "quarantine" | "sever" | "restore";
  vertex: number | null;
  edge: number[] | null;
  duration: number;
  cost: number;
  implement_time: number;
}

export interface EventRecord extends ScenarioView {
  schema_version: number;
  scenario_id: string;
  seq: number;
  kind: Kind;
  t: number;
  /** step events only */
  transmissions?: number[][];
  /** action events only */
  actions?: ActionJson[];
  /** created events only */
  n?: number;
  seeds?: number[];
}

export interface CreateScenarioRequest {
  graph?: { n: number; edges: number[][]; hyperedges?: Record<string, number[]> };
  topology?: Record<string, unknown>;
  preset?: string;
  seed?: number;
  seeds?: number[];
  params?: { beta?: number; gamma?: number; delitescence?: number; horizon?: number };
  protected?: number[];
  log_rate?: number;
  log_mix?: number;
  score_rollouts?: number;
  feature_window?: number;
}

export interface CreateScenarioResponse extends ScenarioView {
  schema_version: number;
  scenario_id: string;
  t: number;
  seed: number;
  preset: string;
  seq: number;
  n: number;
  seeds: number[];
  edges: number[][];
  hyperedges: Record<string, number[]>;
  horizon: number;
}

export interface StatePayload extends ScenarioView {
  schema_version: number;
  scenario_id: string;
  t: number;
  seq: number;
  n: number;
  compartment_names: string[];
  anomaly: number[];
  heatmap: number[];
  scores: { risk: number[]; exploitability: number[]; impact: number[] };
  cloud: { risk: number; exploitability: number; impact: number };
}

export interface StepResponse extends ScenarioView {
  scenario_id: string;
  t: number;
  steps_applied: number;
  seq: number;
}

export interface ForecastFrame {
  t: number;
  scores: number[];
}

export interface ForecastPayload {
  scenario_id: string;
  t: number;
  k: number;
  frames: ForecastFrame[];
}

export interface PlanPayload {
  scenario_id: string;
  t: number;
  plan: ActionJson[];
  objective: number;
  baseline_objective: number;
  report: {
    time_to_implement: number;
    business_impact: number;
    containment_prob: number;
  };
}

export interface JobRound {
  round: number;
  m: number;
  epsilon: number;
  rho: number;
  mean_update_norm: number;
  loss_global: number;
}

export interface JobPayload {
  job_id: string;
  status: "running" | "done" | "error";
  rounds: JobRound[];
  config: Record<string, unknown>;
  epsilon: number;
  error?: string;
}

export interface ScenarioListEntry {
  scenario_id: string;
  t: number;
  n: number;
  counts: Counts;
  finished: boolean;
}
