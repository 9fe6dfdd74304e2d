import type { EventRecord } from "./types.js";

/**
 * Applies events strictly in sequence-number order.
 *
 * The stream itself is ordered, but a reconnect can replay records we
 * already applied, and a polling fallback can hand us batches out of
 * order.  Anything at or below the cursor is dropped; anything ahead of
 * the next expected seq waits in a side buffer until the gap fills.
 */
export class EventBuffer {
  private pending = new Map<number, EventRecord>();
  private _cursor: number;

  constructor(
    private readonly apply: (record: EventRecord) => void,
    startSeq = 0,
  ) {
    this._cursor = startSeq;
  }

  /** Last applied sequence number. */
  get cursor(): number {
    return this._cursor;
  }

  /** Buffered records waiting on a gap. */
  get pendingCount(): number {
    return this.pending.size;
  }

  push(record: EventRecord): void {
    if (record.seq <= this._cursor) return; // duplicate / replay
    if (record.seq > this._cursor + 1) {
      this.pending.set(record.seq, record);
      return;
    }
    this.apply(record);
    this._cursor = record.seq;
    let next = this.pending.get(this._cursor + 1);
    while (next !== undefined) {
      this.pending.delete(next.seq);
      this.apply(next);
      this._cursor = next.seq;
      next = this.pending.get(this._cursor + 1);
    }
  }

  pushAll(records: Iterable<EventRecord>): void {
    for (const r of records) this.push(r);
  }
}

/** Split ndjson byte chunks into parsed records, tolerating chunk
 * boundaries that fall mid-line. */
export class NdjsonParser {
  private buffer = "";
  private decoder = new TextDecoder();

  feed(chunk: Uint8Array): EventRecord[] {
    this.buffer += this.decoder.decode(chunk, { stream: true });
    const out: EventRecord[] = [];
    let idx = this.buffer.indexOf("\n");
    while (idx >= 0) {
      const line = this.buffer.slice(0, idx).trim();
      this.buffer = this.buffer.slice(idx + 1);
      if (line.length > 0) out.push(JSON.parse(line) as EventRecord);
      idx = this.buffer.indexOf("\n");
    }
    return out;
  }
}
