/** Review-session state machine, free of DOM concerns so it is testable
 * headlessly. Invariants it owns:
 *   - submit stays unavailable until a verdict is chosen;
 *   - a sufficient verdict requires non-empty reasoning;
 *   - typed reasoning survives transient network failures;
 *   - a lost lease surfaces a visible re-queue notice and moves on.
 */

import { LeaseConflict, ReviewApi, ReviewSample } from "./api.js";

export type Phase = "idle" | "loading" | "reviewing" | "submitting" | "drained" | "error";

export type Verdict = "yes" | "no";

export interface Progress {
  reviewed: number;
  accepted: number;
  rejected: number;
}

export class ReviewSession {
  phase: Phase = "idle";
  sample: ReviewSample | null = null;
  verdict: Verdict | null = null;
  reasoning = "";
  notice: string | null = null;
  progress: Progress = { reviewed: 0, accepted: 0, rejected: 0 };

  constructor(
    private readonly api: ReviewApi,
    readonly reviewer: string,
  ) {
    if (!reviewer.trim()) throw new Error("reviewer id required");
  }

  /** Submit is legal only with a chosen verdict, and a sufficient verdict
   * must carry reasoning. */
  canSubmit(): boolean {
    if (this.phase !== "reviewing" || this.sample === null || this.verdict === null) {
      return false;
    }
    return this.verdict === "no" || this.reasoning.trim().length > 0;
  }

  chooseVerdict(verdict: Verdict): void {
    this.verdict = verdict;
  }

  // opaque to control-flow narrowing: phase may change across awaits
  private unreachable(): boolean {
    return this.phase === "error";
  }

  setReasoning(text: string): void {
    this.reasoning = text;
  }

  async loadNext(): Promise<void> {
    this.phase = "loading";
    this.notice = null;
    let sample: ReviewSample | null;
    try {
      sample = await this.api.fetchNext(this.reviewer);
    } catch (error) {
      this.phase = "error";
      this.notice = `could not reach the review service: ${describe(error)} - retry`;
      return;
    }
    this.verdict = null;
    this.reasoning = "";
    if (sample === null) {
      this.sample = null;
      this.phase = "drained";
      this.notice = "review queue is empty";
      return;
    }
    this.sample = sample;
    this.phase = "reviewing";
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || this.sample === null || this.verdict === null) return;
    const submitted = this.sample;
    const sufficient = this.verdict === "yes";
    this.phase = "submitting";
    try {
      await this.api.submitVerdict(submitted.sample_id, {
        reviewer: this.reviewer,
        sufficient,
        reasoning: this.reasoning,
      });
    } catch (error) {
      if (error instanceof LeaseConflict) {
        // someone else holds (or resolved) this sample now; move on visibly
        await this.loadNext();
        if (!this.unreachable()) {
          this.notice = `lease lost on ${submitted.sample_id}; sample re-queued elsewhere`;
        }
        return;
      }
      // transient failure: keep the sample and everything typed so far
      this.phase = "reviewing";
      this.notice = `submit failed: ${describe(error)} - retry`;
      return;
    }
    this.progress.reviewed += 1;
    if (sufficient) {
      this.progress.accepted += 1;
    } else {
      this.progress.rejected += 1;
    }
    await this.loadNext();
  }
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}
