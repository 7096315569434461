/** Serialized write queue between the component and the service.
 *
 * Writes flush one at a time, each carrying the version of the last
 * server acknowledgement. A 409 freezes the queue and raises the conflict
 * flag for the refresh banner; nothing is ever overwritten silently.
 */

import type { ServiceClient } from "./api.js";
import type { PendingWrite, RecordView } from "./types.js";

export class SyncEngine {
  record: RecordView;
  pending: PendingWrite[] = [];
  conflict = false;
  lastError?: string;
  private flushing = false;

  constructor(
    private client: ServiceClient,
    record: RecordView,
    private onChange: () => void = () => {},
  ) {
    this.record = record;
  }

  enqueue(write: PendingWrite): void {
    if (this.conflict || this.record.state === "submitted") return;
    this.pending.push(write);
    this.onChange();
    void this.flush();
  }

  async flush(): Promise<void> {
    if (this.flushing) return;
    this.flushing = true;
    try {
      while (this.pending.length > 0 && !this.conflict) {
        const write = this.pending[0];
        const result =
          write.kind === "span"
            ? await this.client.putSpan(
                this.record.record_id,
                write.span,
                this.record.version,
              )
            : await this.client.putQA(
                this.record.record_id,
                write.qaId,
                write.label,
                write.note,
                this.record.version,
              );
        if (result.conflict) {
          this.conflict = true;
          break;
        }
        if (!result.ok || result.body === null) {
          this.lastError = result.errorDetail ?? `HTTP ${result.status}`;
          this.pending.shift();
          continue;
        }
        this.record = result.body;
        this.pending.shift();
        this.onChange();
      }
    } finally {
      this.flushing = false;
      this.onChange();
    }
  }

  /** Wait until the queue is drained or frozen by a conflict. */
  async settle(): Promise<void> {
    while ((this.pending.length > 0 || this.flushing) && !this.conflict) {
      await this.flush();
      await Promise.resolve();
    }
  }

  async submit(): Promise<boolean> {
    await this.settle();
    if (this.conflict || this.pending.length > 0) return false;
    const result = await this.client.submit(
      this.record.record_id,
      this.record.version,
    );
    if (result.conflict) {
      this.conflict = true;
      this.onChange();
      return false;
    }
    if (!result.ok || result.body === null) {
      this.lastError = result.errorDetail ?? `HTTP ${result.status}`;
      this.onChange();
      return false;
    }
    this.record = result.body;
    this.onChange();
    return true;
  }
}
