// Typed client for the review service API. The UI talks to these five
// endpoints and nothing else; the server's decision log stays the only
// source of truth.

export type ItemState = 'pending' | 'accepted' | 'rejected';
export type Severity = 'none' | 'warn' | 'block';

export interface ItemFlags {
  clipped_fraction: number;
  structure_score: number;
  severity: Severity;
}

export interface ReviewItem {
  item_id: string;
  state: ItemState;
  source_id: string;
  source_domain: string;
  target_domain: string;
  copy_index: number;
  flags: ItemFlags;
}

export interface Progress {
  counts: Record<string, number>;
  predicted: Record<string, number>;
  ratio: number | null;
  balanced: boolean | null;
  tolerance: number;
}

export interface Decision {
  item_id: string;
  prior_state: ItemState;
  new_state: ItemState;
  reviewer: string;
}

/** Stale prior_state: someone else decided first. */
export class ConflictError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = 'ConflictError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchImpl: FetchLike;

  constructor(private base: string, fetchImpl?: FetchLike) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  async queue(state?: ItemState): Promise<ReviewItem[]> {
    const suffix = state ? `?state=${state}` : '';
    const response = await this.fetchImpl(`${this.base}/api/queue${suffix}`);
    if (!response.ok) {
      throw new Error(`queue fetch failed: ${response.status}`);
    }
    const body = (await response.json()) as { items: ReviewItem[] };
    return body.items;
  }

  async progress(): Promise<Progress> {
    const response = await this.fetchImpl(`${this.base}/api/progress`);
    if (!response.ok) {
      throw new Error(`progress fetch failed: ${response.status}`);
    }
    return (await response.json()) as Progress;
  }

  async decide(decision: Decision): Promise<{ item_id: string; state: ItemState }> {
    const response = await this.fetchImpl(`${this.base}/api/decision`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(decision),
    });
    if (response.status === 409) {
      const body = await response.json().catch(() => ({ detail: 'conflict' }));
      throw new ConflictError((body as { detail?: string }).detail ?? 'conflict');
    }
    if (!response.ok) {
      throw new Error(`decision failed: ${response.status}`);
    }
    return (await response.json()) as { item_id: string; state: ItemState };
  }

  imageUrl(itemId: string, which: 'source' | 'generated'): string {
    return `${this.base}/api/image/${itemId}?which=${which}`;
  }
}
