// Review session controller: the queue view model and every action the
// keyboard can trigger. Deliberately DOM-free so a scripted session can
// drive it headless against a live server.
//
// The view derives from /api/queue and /api/progress; local mutations
// (optimistic advance, unsent retention) only bridge the gap until the
// server acknowledges or a refresh reconciles.

import {
  ApiClient,
  ConflictError,
  Decision,
  ItemState,
  Progress,
  ReviewItem,
} from './api.js';

export interface SessionView {
  items: ReviewItem[];
  cursor: number;
  progress: Progress | null;
  progressStale: boolean;
  conflict: string | null;
  unsentCount: number;
  lastError: string | null;
}

interface AppliedDecision {
  item_id: string;
  state: ItemState;
}

export class ReviewSession {
  private items: ReviewItem[] = [];
  private cursor = 0;
  private progressData: Progress | null = null;
  private progressStale = false;
  private conflictNotice: string | null = null;
  private lastError: string | null = null;
  private unsent: Decision[] = [];
  private history: AppliedDecision[] = [];
  private listeners: Array<() => void> = [];

  constructor(private client: ApiClient, private reviewer: string) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  view(): SessionView {
    return {
      items: this.items,
      cursor: this.cursor,
      progress: this.progressData,
      progressStale: this.progressStale,
      conflict: this.conflictNotice,
      unsentCount: this.unsent.length,
      lastError: this.lastError,
    };
  }

  current(): ReviewItem | null {
    return this.items.length ? this.items[this.cursor % this.items.length] : null;
  }

  /** Reload the pending queue and progress from the server. */
  async refresh(): Promise<void> {
    this.items = await this.client.queue('pending');
    if (this.cursor >= this.items.length) {
      this.cursor = 0;
    }
    await this.pollProgress();
    this.notify();
  }

  /** Advance focus to the next item, wrapping in queue order. */
  skip(): void {
    if (this.items.length) {
      this.cursor = (this.cursor + 1) % this.items.length;
      this.notify();
    }
  }

  dismissConflict(): void {
    this.conflictNotice = null;
    this.notify();
  }

  async accept(): Promise<void> {
    await this.decide('accepted');
  }

  async reject(): Promise<void> {
    await this.decide('rejected');
  }

  private async decide(verdict: ItemState): Promise<void> {
    const item = this.current();
    if (!item) {
      return;
    }
    const decision: Decision = {
      item_id: item.item_id,
      prior_state: 'pending',
      new_state: verdict,
      reviewer: this.reviewer,
    };
    // optimistic advance: drop the item locally, keep the cursor slot
    this.items = this.items.filter((i) => i.item_id !== item.item_id);
    if (this.cursor >= this.items.length) {
      this.cursor = 0;
    }
    this.notify();
    await this.submit(decision);
  }

  private async submit(decision: Decision): Promise<void> {
    try {
      const result = await this.client.decide(decision);
      this.history.push({ item_id: result.item_id, state: result.state });
      this.lastError = null;
    } catch (error) {
      if (error instanceof ConflictError) {
        this.conflictNotice = `${decision.item_id}: ${error.message}`;
        await this.refresh();
      } else {
        // network trouble: never drop a verdict, retry later
        this.unsent.push(decision);
        this.lastError = String(error);
      }
    }
    this.notify();
  }

  /** Revert the last acknowledged decision through the same endpoint. */
  async undo(): Promise<void> {
    const last = this.history.pop();
    if (!last) {
      return;
    }
    try {
      await this.client.decide({
        item_id: last.item_id,
        prior_state: last.state,
        new_state: 'pending',
        reviewer: this.reviewer,
      });
    } catch (error) {
      if (error instanceof ConflictError) {
        this.conflictNotice = `${last.item_id}: ${error.message}`;
      } else {
        this.lastError = String(error);
        this.notify();
        return;
      }
    }
    await this.refresh();
  }

  /** Re-send decisions that failed with a network error. */
  async retryUnsent(): Promise<void> {
    const queued = this.unsent;
    this.unsent = [];
    for (const decision of queued) {
      await this.submit(decision);
    }
  }

  async pollProgress(): Promise<void> {
    try {
      this.progressData = await this.client.progress();
      this.progressStale = false;
    } catch {
      this.progressStale = true;
    }
    this.notify();
  }
}
