/** End-to-end run against a real review service spawned from the CLI: a
 * reviewer leases queued samples, the sufficient verdict's reasoning must
 * come back verbatim in the stage1 export, and the rejected sample must
 * vanish from both exports. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiError, LeaseConflict, ReviewApi } from "../src/api.js";
import { ReviewSession } from "../src/viewmodel.js";

const REASONING =
  "the sustained evening ramp only fits the chosen option; the others contradict the final plateau.";

let workdir: string;
let server: ChildProcess | null = null;
let serverLog = "";
let api: ReviewApi;
let session: ReviewSession;

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        probe.close(() => reject(new Error("no port assigned")));
        return;
      }
      const { port } = address;
      probe.close(() => resolve(port));
    });
  });
}

async function waitForServer(target: ReviewApi, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      await target.queueStats();
      return;
    } catch (error) {
      lastError = error;
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
  }
  throw new Error(`review service never came up: ${String(lastError)}\n${serverLog}`);
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "review-e2e-"));
  const dataPath = join(workdir, "data.jsonl");

  const generated = spawnSync(
    "tsreason",
    ["generate", "--seed", "3", "--n", "1", "--out", dataPath],
    { encoding: "utf8" },
  );
  if (generated.status !== 0) {
    throw new Error(`dataset generation failed: ${generated.stderr}`);
  }

  const port = await freePort();
  server = spawn(
    "tsreason",
    [
      "review-serve",
      "--data",
      dataPath,
      "--events",
      join(workdir, "events.log"),
      "--analyzer",
      "wrong",
      "--port",
      String(port),
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (chunk: Buffer) => {
    serverLog += chunk.toString();
  });
  server.stderr?.on("data", (chunk: Buffer) => {
    serverLog += chunk.toString();
  });

  api = new ReviewApi(`http://127.0.0.1:${port}`);
  await waitForServer(api, 30_000);
  session = new ReviewSession(api, "e2e-reviewer");
}, 60_000);

afterAll(async () => {
  if (server !== null) {
    const exited = new Promise((resolve) => server?.once("exit", resolve));
    server.kill("SIGTERM");
    await Promise.race([exited, new Promise((resolve) => setTimeout(resolve, 3_000))]);
  }
  rmSync(workdir, { recursive: true, force: true });
});

describe("review service round trip", () => {
  it("boots with every wrong discrete answer queued and forecasts held for curation", async () => {
    const stats = await api.queueStats();
    expect(stats.total).toBe(16);
    expect(stats.stages["review_queued"]).toBe(12);
    expect(stats.stages["pending"]).toBe(4);
    expect(stats.stage1_exportable).toBe(0);
  }, 30_000);

  it("refuses an analyzer re-run because the boot pass already covered the dataset", async () => {
    const failure = await api.runStage("analyzer").catch((error: unknown) => error);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(400);
    expect((failure as ApiError).message).toContain("no analyzer responder");
  }, 30_000);

  it("carries a sufficient verdict's reasoning verbatim into the stage1 export and drops the rejected sample", async () => {
    await session.loadNext();
    expect(session.phase).toBe("reviewing");
    const accepted = session.sample;
    expect(accepted).not.toBeNull();

    session.chooseVerdict("yes");
    session.setReasoning(REASONING);
    await session.submit();
    expect(session.progress).toEqual({ reviewed: 1, accepted: 1, rejected: 0 });

    expect(session.phase).toBe("reviewing");
    const rejected = session.sample;
    expect(rejected).not.toBeNull();
    expect(rejected?.sample_id).not.toBe(accepted?.sample_id);

    session.chooseVerdict("no");
    await session.submit();
    expect(session.progress).toEqual({ reviewed: 2, accepted: 1, rejected: 1 });

    const rewrite = await api.runStage("rewriter");
    expect(rewrite.moved?.["rewritten"]).toBe(1);
    expect(rewrite.moved?.["drifted"]).toBe(0);

    const stage1 = await api.exportStage("stage1");
    expect(stage1).toHaveLength(1);
    expect(stage1[0]?.id).toBe(accepted?.sample_id);
    expect(stage1[0]?.cot).toContain(REASONING);
    expect(stage1[0]?.gold).toEqual(accepted?.gold);

    const stage2 = await api.exportStage("stage2");
    expect(stage2).toHaveLength(15);
    const stage2Ids = new Set(stage2.map((record) => record.id));
    expect(stage2Ids.has(String(accepted?.sample_id))).toBe(true);
    expect(stage2Ids.has(String(rejected?.sample_id))).toBe(false);
    expect(stage2.every((record) => record.cot === null)).toBe(true);

    const stage1Ids = new Set(stage1.map((record) => record.id));
    expect(stage1Ids.has(String(rejected?.sample_id))).toBe(false);

    const stats = await api.queueStats();
    expect(stats.stages["rejected"]).toBe(1);
    expect(stats.stage1_exportable).toBe(1);
  }, 30_000);

  it("refuses a verdict from a reviewer who does not hold the lease", async () => {
    await session.loadNext();
    expect(session.phase).toBe("reviewing");
    const leased = session.sample;
    expect(leased).not.toBeNull();

    const intruder = await api
      .submitVerdict(String(leased?.sample_id), {
        reviewer: "intruder",
        sufficient: true,
        reasoning: "mine now",
      })
      .catch((error: unknown) => error);
    expect(intruder).toBeInstanceOf(LeaseConflict);

    session.chooseVerdict("no");
    await session.submit();
    expect(session.progress.rejected).toBe(2);
  }, 30_000);

  it("never curates forecasts whose analyzer attempt failed to parse", async () => {
    const curated = await api.runStage("curate", 3);
    expect(curated.selected).toBe(0);
    expect(curated.under_budget).toBe(true);

    const stage1 = await api.exportStage("stage1");
    expect(stage1).toHaveLength(1);
  }, 30_000);
});
