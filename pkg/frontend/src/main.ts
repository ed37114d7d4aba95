/** DOM wiring for the review interface. All state lives in ReviewSession;
 * this file only mirrors it into elements and forwards user input. */

import { ReviewApi, ReviewSample } from "./api.js";
import { renderChart } from "./chart.js";
import { ReviewSession } from "./viewmodel.js";

export interface AppElements {
  reviewerInput: HTMLInputElement;
  startButton: HTMLButtonElement;
  statusLine: HTMLElement;
  noticeBanner: HTMLElement;
  samplePanel: HTMLElement;
  taskLabel: HTMLElement;
  contextText: HTMLElement;
  chartHost: HTMLElement;
  eventList: HTMLElement;
  optionList: HTMLElement;
  attemptText: HTMLElement;
  verdictYes: HTMLInputElement;
  verdictNo: HTMLInputElement;
  reasoningInput: HTMLTextAreaElement;
  submitButton: HTMLButtonElement;
  progressLine: HTMLElement;
}

export function collectElements(root: Document): AppElements {
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = root.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
  };
  return {
    reviewerInput: byId<HTMLInputElement>("reviewer-id"),
    startButton: byId<HTMLButtonElement>("start-review"),
    statusLine: byId("status-line"),
    noticeBanner: byId("notice-banner"),
    samplePanel: byId("sample-panel"),
    taskLabel: byId("task-label"),
    contextText: byId("context-text"),
    chartHost: byId("chart-host"),
    eventList: byId("event-list"),
    optionList: byId("option-list"),
    attemptText: byId("attempt-text"),
    verdictYes: byId<HTMLInputElement>("verdict-yes"),
    verdictNo: byId<HTMLInputElement>("verdict-no"),
    reasoningInput: byId<HTMLTextAreaElement>("reasoning-input"),
    submitButton: byId<HTMLButtonElement>("submit-verdict"),
    progressLine: byId("progress-line"),
  };
}

function renderSample(els: AppElements, sample: ReviewSample): void {
  els.taskLabel.textContent = sample.task;
  els.contextText.textContent = sample.context;
  els.chartHost.innerHTML = renderChart(sample.series);

  els.eventList.textContent = "";
  for (const event of sample.events) {
    const item = els.eventList.ownerDocument.createElement("li");
    item.textContent = `${new Date(event.time * 1000).toISOString()} - ${event.description}`;
    els.eventList.appendChild(item);
  }

  els.optionList.textContent = "";
  for (const option of sample.options) {
    const item = els.optionList.ownerDocument.createElement("li");
    item.textContent = `${option.letter}. ${option.text}`;
    els.optionList.appendChild(item);
  }

  els.attemptText.textContent = sample.analyzer_attempt ?? "(hidden)";
}

export function syncView(els: AppElements, session: ReviewSession): void {
  els.noticeBanner.textContent = session.notice ?? "";
  els.noticeBanner.hidden = session.notice === null;
  els.submitButton.disabled = !session.canSubmit();
  els.progressLine.textContent =
    `reviewed ${session.progress.reviewed}` +
    ` / accepted ${session.progress.accepted}` +
    ` / rejected ${session.progress.rejected}`;

  switch (session.phase) {
    case "idle":
      els.statusLine.textContent = "enter a reviewer id to begin";
      break;
    case "loading":
      els.statusLine.textContent = "fetching the next sample...";
      break;
    case "submitting":
      els.statusLine.textContent = "submitting verdict...";
      break;
    case "drained":
      els.statusLine.textContent = "queue drained - nothing left to review";
      break;
    case "error":
      els.statusLine.textContent = "service unreachable";
      break;
    case "reviewing":
      els.statusLine.textContent = `reviewing as ${session.reviewer}`;
      break;
  }

  const showSample = session.phase === "reviewing" || session.phase === "submitting";
  els.samplePanel.hidden = !showSample;
  if (showSample && session.sample) {
    renderSample(els, session.sample);
    els.verdictYes.checked = session.verdict === "yes";
    els.verdictNo.checked = session.verdict === "no";
    if (els.reasoningInput.value !== session.reasoning) {
      els.reasoningInput.value = session.reasoning;
    }
  }
}

/** Wire the page. Returns the session so tests can drive and inspect it. */
export function initApp(root: Document, api: ReviewApi): { start: () => Promise<ReviewSession> } {
  const els = collectElements(root);
  let session: ReviewSession | null = null;

  const refresh = (): void => {
    if (session) syncView(els, session);
  };

  const start = async (): Promise<ReviewSession> => {
    session = new ReviewSession(api, els.reviewerInput.value.trim());
    els.verdictYes.addEventListener("change", () => {
      session?.chooseVerdict("yes");
      refresh();
    });
    els.verdictNo.addEventListener("change", () => {
      session?.chooseVerdict("no");
      refresh();
    });
    els.reasoningInput.addEventListener("input", () => {
      session?.setReasoning(els.reasoningInput.value);
      refresh();
    });
    els.submitButton.addEventListener("click", () => {
      void session?.submit().then(refresh);
      refresh();
    });
    await session.loadNext();
    refresh();
    return session;
  };

  els.startButton.addEventListener("click", () => {
    void start();
  });
  return { start };
}
