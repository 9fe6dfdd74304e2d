import { NdjsonParser } from "./events.js";
import type {
  ActionJson,
  CreateScenarioRequest,
  CreateScenarioResponse,
  EventRecord,
  ForecastPayload,
  JobPayload,
  PlanPayload,
  ScenarioListEntry,
  StatePayload,
  StepResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseJson(resp: Response): Promise<any> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, String(body?.error ?? resp.statusText));
  }
  return body;
}

/** Thin REST wrapper over the defense service. */
export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async call(method: string, path: string, body?: unknown): Promise<any> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return parseJson(resp);
  }

  health(): Promise<{ status: string }> {
    return this.call("GET", "/health");
  }

  createScenario(req: CreateScenarioRequest): Promise<CreateScenarioResponse> {
    return this.call("POST", "/scenarios", req);
  }

  listScenarios(): Promise<{ scenarios: ScenarioListEntry[] }> {
    return this.call("GET", "/scenarios");
  }

  getState(sid: string): Promise<StatePayload> {
    return this.call("GET", `/scenarios/${sid}/state`);
  }

  step(sid: string, n = 1): Promise<StepResponse> {
    return this.call("POST", `/scenarios/${sid}/steps`, { n });
  }

  postActions(sid: string, actions: Partial<ActionJson>[]): Promise<StepResponse> {
    return this.call("POST", `/scenarios/${sid}/actions`, { actions });
  }

  forecast(sid: string, k: number): Promise<ForecastPayload> {
    return this.call("GET", `/scenarios/${sid}/forecast?k=${k}`);
  }

  plan(sid: string, opts: Record<string, number> = {}): Promise<PlanPayload> {
    return this.call("POST", `/scenarios/${sid}/plan`, opts);
  }

  createJob(config: Record<string, unknown>): Promise<JobPayload> {
    return this.call("POST", "/federation/jobs", config);
  }

  getJob(jobId: string): Promise<JobPayload> {
    return this.call("GET", `/federation/jobs/${jobId}`);
  }

  async waitForJob(jobId: string, timeoutMs = 60_000, pollMs = 250): Promise<JobPayload> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.getJob(jobId);
      if (job.status !== "running") return job;
      if (Date.now() > deadline) throw new Error(`job ${jobId} still running after ${timeoutMs}ms`);
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }
}

export interface StreamHandlers {
  onEvent: (record: EventRecord) => void;
  /** connection-state transitions, for the console banner */
  onStatus?: (status: "live" | "reconnecting" | "polling" | "stopped") => void;
}

/**
 * Follows a scenario's ndjson event stream, resubscribing from the last
 * seen sequence number after a drop.  If streaming keeps failing, falls
 * back to polling the same endpoint (the server replays the backlog and
 * we cancel the body once it goes quiet).
 */
export class EventStream {
  private stopped = false;
  private lastSeq: number;
  private activeReader: ReadableStreamDefaultReader<Uint8Array> | null = null;

  constructor(
    private readonly client: ServiceClient,
    private readonly sid: string,
    private readonly handlers: StreamHandlers,
    sinceSeq = 0,
    private readonly retryDelayMs = 500,
    private readonly maxStreamFailures = 3,
  ) {
    this.lastSeq = sinceSeq;
  }

  get cursor(): number {
    return this.lastSeq;
  }

  url(): string {
    return `${this.client.baseUrl}/scenarios/${this.sid}/events?since=${this.lastSeq}`;
  }

  stop(): void {
    this.stopped = true;
    // Wake up any read() blocked on a live connection so run() can return.
    this.activeReader?.cancel().catch(() => undefined);
    this.handlers.onStatus?.("stopped");
  }

  /** Runs until stop(); resolves when stopped. */
  async run(fetchFn: typeof fetch = fetch): Promise<void> {
    let streamFailures = 0;
    while (!this.stopped) {
      try {
        this.handlers.onStatus?.("live");
        await this.followOnce(fetchFn);
        streamFailures = 0;
      } catch (err) {
        if (this.stopped) break;
        streamFailures += 1;
        this.handlers.onStatus?.("reconnecting");
        if (streamFailures >= this.maxStreamFailures) {
          this.handlers.onStatus?.("polling");
          await this.pollOnce(fetchFn).catch(() => undefined);
        }
        await new Promise((r) => setTimeout(r, this.retryDelayMs));
      }
    }
  }

  private handle(record: EventRecord): void {
    if (record.seq > this.lastSeq) this.lastSeq = record.seq;
    this.handlers.onEvent(record);
  }

  private async followOnce(fetchFn: typeof fetch): Promise<void> {
    const resp = await fetchFn(this.url());
    if (!resp.ok || resp.body === null) {
      throw new ApiError(resp.status, "event stream unavailable");
    }
    const reader = resp.body.getReader();
    this.activeReader = reader;
    const parser = new NdjsonParser();
    try {
      for (;;) {
        if (this.stopped) break;
        const { done, value } = await reader.read();
        if (done) {
          if (this.stopped) break;
          throw new Error("event stream closed by server");
        }
        for (const record of parser.feed(value)) this.handle(record);
      }
    } finally {
      this.activeReader = null;
      await reader.cancel().catch(() => undefined);
    }
  }

  /** One polling round: read the replayed backlog, then hang up. */
  private async pollOnce(fetchFn: typeof fetch): Promise<void> {
    const resp = await fetchFn(this.url());
    if (!resp.ok || resp.body === null) return;
    const reader = resp.body.getReader();
    const parser = new NdjsonParser();
    try {
      for (;;) {
        const result = await Promise.race([
          reader.read(),
          new Promise<"idle">((r) => setTimeout(() => r("idle"), 200)),
        ]);
        if (result === "idle") break; // backlog drained, stream gone quiet
        if (result.done) break;
        for (const record of parser.feed(result.value)) this.handle(record);
      }
    } finally {
      await reader.cancel().catch(() => undefined);
    }
  }
}
