/** Typed client for the annotation review service. The UI never constructs
 * domain values itself; everything round-trips through these calls. */

export interface SeriesPayload {
  values: number[];
  start: number;
  step: number;
  unit: string;
  domain: string;
}

export interface EventPayload {
  time: number;
  description: string;
}

export interface OptionPayload {
  letter: string;
  text: string;
}

export interface ReviewSample {
  sample_id: string;
  task: string;
  context: string;
  series: SeriesPayload[];
  events: EventPayload[];
  options: OptionPayload[];
  gold: string | number[];
  analyzer_attempt: string | null;
  leased_until: number;
}

export interface HumanVerdict {
  sufficient: boolean;
  reasoning: string;
  reviewer_id: string;
}

export interface ReviewRecord {
  sample_id: string;
  task: string;
  stage: string;
  analyzer_correct: boolean;
  mae: number | null;
  drift_flag: boolean;
  error_note: string | null;
  human_verdict: HumanVerdict | null;
}

export interface QueueStats {
  stages: Record<string, number>;
  total: number;
  stage1_exportable: number;
  stage2_exportable: number;
}

export interface PipelineResult {
  stage: string;
  moved?: Record<string, number>;
  selected?: number;
  under_budget?: boolean;
}

/** One line of a stage export in the canonical record layout. */
export interface ExportedRecord {
  id: string;
  task: string;
  context: string;
  series: SeriesPayload[];
  events: EventPayload[];
  options: Array<[string, string]>;
  horizon: number | null;
  gold: string | number[];
  split: string;
  cot: string | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** 409: the lease was lost (expired or stolen) or the sample is resolved. */
export class LeaseConflict extends ApiError {
  constructor(detail: string) {
    super(409, detail);
    this.name = "LeaseConflict";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function detailOf(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // fall through to the status line
  }
  return `HTTP ${response.status}`;
}

export class ReviewApi {
  private readonly base: string;

  constructor(
    baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  /** Lease the next queued sample; null when the queue is drained. */
  async fetchNext(reviewer: string): Promise<ReviewSample | null> {
    const url = `${this.base}/review/next?reviewer=${encodeURIComponent(reviewer)}`;
    const response = await this.fetchFn(url);
    if (response.status === 404) return null;
    if (!response.ok) throw new ApiError(response.status, await detailOf(response));
    return (await response.json()) as ReviewSample;
  }

  async submitVerdict(
    sampleId: string,
    verdict: { reviewer: string; sufficient: boolean; reasoning: string },
  ): Promise<ReviewRecord> {
    const response = await this.fetchFn(`${this.base}/review/${encodeURIComponent(sampleId)}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(verdict),
    });
    if (response.status === 409) throw new LeaseConflict(await detailOf(response));
    if (!response.ok) throw new ApiError(response.status, await detailOf(response));
    return (await response.json()) as ReviewRecord;
  }

  async queueStats(): Promise<QueueStats> {
    const response = await this.fetchFn(`${this.base}/queue/stats`);
    if (!response.ok) throw new ApiError(response.status, await detailOf(response));
    return (await response.json()) as QueueStats;
  }

  async runStage(stage: "analyzer" | "rewriter" | "curate", budget?: number): Promise<PipelineResult> {
    const response = await this.fetchFn(`${this.base}/pipeline/run`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(budget === undefined ? { stage } : { stage, budget }),
    });
    if (!response.ok) throw new ApiError(response.status, await detailOf(response));
    return (await response.json()) as PipelineResult;
  }

  async exportStage(stage: "stage1" | "stage2"): Promise<ExportedRecord[]> {
    const response = await this.fetchFn(`${this.base}/export/${stage}`);
    if (!response.ok) throw new ApiError(response.status, await detailOf(response));
    const text = await response.text();
    return text
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as ExportedRecord);
  }
}
