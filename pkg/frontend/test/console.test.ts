import { describe, expect, it } from "vitest";

import { GatewayClient, PendingPrompt, StaleSeqError, Transcript } from "../src/api.js";
import {
  ConsoleView,
  SessionController,
  escapeHtml,
  renderParagraphs,
  renderTranscript,
} from "../src/console.js";

class FakeView implements ConsoleView {
  banners: (string | null)[] = [];
  prompts: (PendingPrompt | null)[] = [];
  transcripts: Transcript[] = [];
  submitEnabled: boolean[] = [];
  draftCleared = 0;

  showBanner(text: string | null) { this.banners.push(text); }
  showPrompt(prompt: PendingPrompt | null) { this.prompts.push(prompt); }
  showTranscript(t: Transcript) { this.transcripts.push(t); }
  setSubmitEnabled(enabled: boolean) { this.submitEnabled.push(enabled); }
  clearDraft() { this.draftCleared += 1; }
}

interface FakeGateway {
  pending: PendingPrompt | null;
  entries: { text: string }[];
  failSubmits: number;
  submitted: { seq: number; text: string }[];
}

function fakeClient(state: FakeGateway): GatewayClient {
  const client = {
    async pollPrompt(_agent: string, _wait: number) {
      return state.pending;
    },
    async transcript(_agent: string) {
      return { format_version: 1, entries: state.entries } as Transcript;
    },
    async submitResponse(_agent: string, seq: number, text: string) {
      if (state.failSubmits > 0) {
        state.failSubmits -= 1;
        throw new TypeError("network down");
      }
      if (state.pending === null || state.pending.seq !== seq) {
        throw new StaleSeqError(`stale seq ${seq}`);
      }
      state.submitted.push({ seq, text });
      state.entries = [...state.entries, { text }];
      state.pending = null;
    },
  };
  return client as unknown as GatewayClient;
}

function controllerWith(state: FakeGateway, schedule = (_fn: () => void, _ms: number) => {}) {
  const view = new FakeView();
  const controller = new SessionController(fakeClient(state), view, "h1", {
    pollSeconds: 0,
    idleMs: 1,
    retryMs: 1,
    schedule,
  });
  return { controller, view };
}

describe("SessionController", () => {
  it("enables submit only with a pending prompt and a non-empty draft", async () => {
    const state: FakeGateway = { pending: null, entries: [], failSubmits: 0, submitted: [] };
    const { controller } = controllerWith(state);
    controller.setDraft("my move");
    expect(controller.canSubmit).toBe(false); // no pending prompt yet
    state.pending = { seq: 0, prompt: "Your move." };
    await controller.tick();
    expect(controller.canSubmit).toBe(true);
    controller.setDraft("   ");
    expect(controller.canSubmit).toBe(false); // blank draft blocked client-side
  });

  it("picks up the prompt and transcript on tick", async () => {
    const state: FakeGateway = {
      pending: { seq: 0, prompt: "Your move." },
      entries: [{ text: "Scene." }],
      failSubmits: 0,
      submitted: [],
    };
    const { controller, view } = controllerWith(state);
    await controller.tick();
    expect(view.prompts).toEqual([{ seq: 0, prompt: "Your move." }]);
    expect(view.transcripts[0].entries).toHaveLength(1);
  });

  it("submit clears the draft and returns to the waiting state", async () => {
    const state: FakeGateway = {
      pending: { seq: 0, prompt: "Your move." },
      entries: [],
      failSubmits: 0,
      submitted: [],
    };
    const { controller, view } = controllerWith(state);
    await controller.tick();
    controller.setDraft("attack at dawn");
    await controller.submit();
    expect(state.submitted).toEqual([{ seq: 0, text: "attack at dawn" }]);
    expect(controller.pending).toBeNull();
    expect(controller.draft).toBe("");
    expect(view.draftCleared).toBe(1);
    expect(view.prompts.at(-1)).toBeNull();
    // the submitted text shows up in the refreshed transcript
    expect(view.transcripts.at(-1)!.entries.map((e) => e.text)).toContain("attack at dawn");
  });

  it("stale seq refreshes the pending prompt instead of crashing", async () => {
    const state: FakeGateway = {
      pending: { seq: 5, prompt: "Current." },
      entries: [],
      failSubmits: 0,
      submitted: [],
    };
    const { controller, view } = controllerWith(state);
    controller.pending = { seq: 4, prompt: "Old." }; // another tab answered seq 4
    controller.setDraft("late move");
    await controller.submit();
    expect(view.banners.some((b) => b && b.includes("already answered"))).toBe(true);
    expect(controller.pending).toEqual({ seq: 5, prompt: "Current." });
  });

  it("network failure keeps the draft and queues a retry", async () => {
    const state: FakeGateway = {
      pending: { seq: 0, prompt: "Your move." },
      entries: [],
      failSubmits: 1,
      submitted: [],
    };
    const queued: (() => void)[] = [];
    const { controller, view } = controllerWith(state, (fn) => queued.push(fn));
    await controller.tick();
    controller.setDraft("hold the line");
    await controller.submit();
    expect(state.submitted).toEqual([]);
    expect(controller.draft).toBe("hold the line"); // draft survives
    expect(queued).toHaveLength(1);
    expect(view.banners.some((b) => b && b.includes("retry"))).toBe(true);
    queued[0]!(); // the network is back; run the queued retry
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(state.submitted).toEqual([{ seq: 0, text: "hold the line" }]);
  });
});

describe("rendering", () => {
  it("escapes html", () => {
    expect(escapeHtml('<b>&"x"</b>')).toBe("&lt;b&gt;&amp;&quot;x&quot;&lt;/b&gt;");
  });

  it("renders blank-line paragraphs and line breaks", () => {
    expect(renderParagraphs("one\ntwo\n\nthree")).toBe("<p>one<br>two</p><p>three</p>");
  });

  it("renders transcript entries with attribution", () => {
    const html = renderTranscript({
      format_version: 1,
      entries: [
        {
          seq: 0,
          author: "SYSTEM",
          kind: "scenario",
          text: "The <situation>.",
          move_index: 0,
          visibility: "ALL",
        },
      ],
    });
    expect(html).toContain("SYSTEM");
    expect(html).toContain("move 0");
    expect(html).toContain("&lt;situation&gt;");
  });
});
