import { describe, expect, it } from "vitest";

import { ApiError, LeaseConflict } from "../src/api.js";
import { ReviewSession } from "../src/viewmodel.js";
import { FakeApi, sampleOf } from "./fakes.js";

function sessionWith(fake: FakeApi, reviewer = "vm-tester"): ReviewSession {
  return new ReviewSession(fake.asApi(), reviewer);
}

describe("ReviewSession construction", () => {
  it("rejects a blank reviewer id", () => {
    const fake = new FakeApi();
    expect(() => sessionWith(fake, "")).toThrow(/reviewer id required/);
    expect(() => sessionWith(fake, "   ")).toThrow(/reviewer id required/);
  });
});

describe("submit gating", () => {
  it("is disabled before anything is loaded", () => {
    const session = sessionWith(new FakeApi());
    expect(session.canSubmit()).toBe(false);
  });

  it("requires a verdict, and reasoning for a sufficient verdict", async () => {
    const fake = new FakeApi();
    fake.queue = [sampleOf("s-1")];
    const session = sessionWith(fake);
    await session.loadNext();

    expect(session.phase).toBe("reviewing");
    expect(session.canSubmit()).toBe(false);

    session.chooseVerdict("yes");
    expect(session.canSubmit()).toBe(false);
    session.setReasoning("   ");
    expect(session.canSubmit()).toBe(false);
    session.setReasoning("the evening peak matches option B only");
    expect(session.canSubmit()).toBe(true);
  });

  it("allows an insufficient verdict without reasoning", async () => {
    const fake = new FakeApi();
    fake.queue = [sampleOf("s-1")];
    const session = sessionWith(fake);
    await session.loadNext();

    session.chooseVerdict("no");
    expect(session.reasoning).toBe("");
    expect(session.canSubmit()).toBe(true);
  });

  it("submit is a no-op while gated", async () => {
    const fake = new FakeApi();
    fake.queue = [sampleOf("s-1")];
    const session = sessionWith(fake);
    await session.loadNext();

    await session.submit();
    expect(fake.calls).toHaveLength(0);
    expect(session.phase).toBe("reviewing");
  });
});

describe("verdict round trips", () => {
  it("submits a sufficient verdict and advances to the next sample", async () => {
    const fake = new FakeApi();
    fake.queue = [sampleOf("s-1"), sampleOf("s-2")];
    const session = sessionWith(fake);
    await session.loadNext();

    session.chooseVerdict("yes");
    session.setReasoning("the 62-point climb rules out everything but B");
    await session.submit();

    expect(fake.calls).toEqual([
      {
        sampleId: "s-1",
        reviewer: "vm-tester",
        sufficient: true,
        reasoning: "the 62-point climb rules out everything but B",
      },
    ]);
    expect(session.progress).toEqual({ reviewed: 1, accepted: 1, rejected: 0 });
    expect(session.phase).toBe("reviewing");
    expect(session.sample?.sample_id).toBe("s-2");
    expect(session.verdict).toBeNull();
    expect(session.reasoning).toBe("");
  });

  it("submits an insufficient verdict and counts the rejection", async () => {
    const fake = new FakeApi();
    fake.queue = [sampleOf("s-1")];
    const session = sessionWith(fake);
    await session.loadNext();

    session.chooseVerdict("no");
    await session.submit();

    expect(fake.calls[0]?.sufficient).toBe(false);
    expect(session.progress).toEqual({ reviewed: 1, accepted: 0, rejected: 1 });
    expect(session.phase).toBe("drained");
    expect(session.notice).toBe("review queue is empty");
    expect(session.sample).toBeNull();
  });
});

describe("failure handling", () => {
  it("reports an unreachable service on load", async () => {
    const fake = new FakeApi();
    fake.queue = [new TypeError("fetch failed")];
    const session = sessionWith(fake);
    await session.loadNext();

    expect(session.phase).toBe("error");
    expect(session.notice).toContain("could not reach the review service");
    expect(session.notice).toContain("fetch failed");
  });

  it("keeps the sample and typed reasoning across a transient submit failure", async () => {
    const fake = new FakeApi();
    fake.queue = [sampleOf("s-1")];
    fake.submitError = new ApiError(500, "store exploded");
    const session = sessionWith(fake);
    await session.loadNext();

    session.chooseVerdict("yes");
    session.setReasoning("peaks align with the second option");
    await session.submit();

    expect(session.phase).toBe("reviewing");
    expect(session.sample?.sample_id).toBe("s-1");
    expect(session.reasoning).toBe("peaks align with the second option");
    expect(session.notice).toBe("submit failed: store exploded - retry");

    await session.submit();
    expect(session.progress.reviewed).toBe(1);
    expect(fake.calls).toHaveLength(2);
  });

  it("moves on with a visible notice when the lease is lost", async () => {
    const fake = new FakeApi();
    fake.queue = [sampleOf("s-1"), sampleOf("s-2")];
    fake.submitError = new LeaseConflict("lease on sample s-1 expired");
    const session = sessionWith(fake);
    await session.loadNext();

    session.chooseVerdict("no");
    await session.submit();

    expect(session.progress.reviewed).toBe(0);
    expect(session.phase).toBe("reviewing");
    expect(session.sample?.sample_id).toBe("s-2");
    expect(session.notice).toBe("lease lost on s-1; sample re-queued elsewhere");
  });

  it("prefers the connectivity notice when the reload after a lost lease fails", async () => {
    const fake = new FakeApi();
    fake.queue = [sampleOf("s-1"), new TypeError("fetch failed")];
    fake.submitError = new LeaseConflict("lease on sample s-1 expired");
    const session = sessionWith(fake);
    await session.loadNext();

    session.chooseVerdict("no");
    await session.submit();

    expect(session.phase).toBe("error");
    expect(session.notice).toContain("could not reach the review service");
    expect(session.notice).not.toContain("lease lost");
  });

  it("drains when the queue is exhausted", async () => {
    const fake = new FakeApi();
    const session = sessionWith(fake);
    await session.loadNext();

    expect(session.phase).toBe("drained");
    expect(session.notice).toBe("review queue is empty");
    expect(session.canSubmit()).toBe(false);
  });
});
