/**
 * Debounced live preview of the target gallery. Each slider change
 * schedules one request after the debounce window; responses are stamped
 * with monotone ids so a stale response never overwrites a newer gallery.
 */

import { Plan, TransformRequest } from "./api.js";

export interface PreviewEvents {
  onPlan: (plan: Plan) => void;
  onError: (message: string) => void;
}

type PreviewFn = (request: TransformRequest) => Promise<{ plan: Plan }>;

export class PreviewScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private nextId = 0;
  private renderedId = 0;

  constructor(
    private previewFn: PreviewFn,
    private events: PreviewEvents,
    private debounceMs: number = 300,
  ) {}

  /** Schedule a preview for the given request, superseding any pending one. */
  request(request: TransformRequest): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.fire(request);
    }, this.debounceMs);
  }

  private async fire(request: TransformRequest): Promise<void> {
    const id = ++this.nextId;
    try {
      const { plan } = await this.previewFn(request);
      if (id <= this.renderedId) return; // superseded by a newer response
      this.renderedId = id;
      this.events.onPlan(plan);
    } catch (err) {
      if (id <= this.renderedId) return;
      this.renderedId = id; // errors render inline but keep the last gallery
      this.events.onError(err instanceof Error ? err.message : String(err));
    }
  }
}
