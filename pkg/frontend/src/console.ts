// Player console: pick an agent, wait for prompts, answer them.
// One session per tab; if two tabs share an agent the first submit wins
// and the second sees the stale-seq banner.

import {
  AgentInfo,
  GatewayClient,
  PendingPrompt,
  StaleSeqError,
  Transcript,
} from "./api.js";

export interface ConsoleView {
  showBanner(text: string | null): void;
  showPrompt(prompt: PendingPrompt | null): void;
  showTranscript(transcript: Transcript): void;
  setSubmitEnabled(enabled: boolean): void;
  clearDraft(): void;
}

export interface SessionOptions {
  pollSeconds: number;
  idleMs: number;
  retryMs: number;
  schedule: (fn: () => void, ms: number) => void;
}

const DEFAULTS: SessionOptions = {
  pollSeconds: 25,
  idleMs: 2000,
  retryMs: 2000,
  schedule: (fn, ms) => setTimeout(fn, ms),
};

export class SessionController {
  pending: PendingPrompt | null = null;
  draft = "";
  private stopped = false;
  private opts: SessionOptions;

  constructor(
    private client: GatewayClient,
    private view: ConsoleView,
    readonly agentId: string,
    opts: Partial<SessionOptions> = {},
  ) {
    this.opts = { ...DEFAULTS, ...opts };
  }

  get canSubmit(): boolean {
    return this.pending !== null && this.draft.trim().length > 0;
  }

  setDraft(text: string): void {
    this.draft = text;
    this.view.setSubmitEnabled(this.canSubmit);
  }

  stop(): void {
    this.stopped = true;
  }

  /** One cycle: (long-)poll for a prompt if idle, then refresh the view. */
  async tick(): Promise<void> {
    if (this.pending === null) {
      const prompt = await this.client.pollPrompt(this.agentId, this.opts.pollSeconds);
      if (prompt !== null) {
        this.pending = prompt;
        this.view.showPrompt(prompt);
        this.view.setSubmitEnabled(this.canSubmit);
      }
    }
    this.view.showTranscript(await this.client.transcript(this.agentId));
  }

  async run(): Promise<void> {
    while (!this.stopped) {
      try {
        await this.tick();
        this.view.showBanner(null);
        if (this.pending !== null) {
          await sleep(this.opts.idleMs); // waiting on the human, not the gateway
        }
      } catch {
        this.view.showBanner("Gateway unreachable; retrying…");
        await sleep(this.opts.retryMs);
      }
    }
  }

  async submit(): Promise<void> {
    if (!this.canSubmit || this.pending === null) return;
    const { seq } = this.pending;
    this.view.setSubmitEnabled(false);
    try {
      await this.client.submitResponse(this.agentId, seq, this.draft);
      this.pending = null;
      this.draft = "";
      this.view.clearDraft();
      this.view.showPrompt(null);
      this.view.showBanner(null);
      this.view.showTranscript(await this.client.transcript(this.agentId));
    } catch (err) {
      if (err instanceof StaleSeqError) {
        // Someone else answered this prompt; pick up whatever is pending now.
        this.view.showBanner("That prompt was already answered; refreshing.");
        this.pending = await this.client.pollPrompt(this.agentId, 0);
        this.view.showPrompt(this.pending);
        this.view.setSubmitEnabled(this.canSubmit);
      } else {
        // Network trouble: keep the draft and retry the unsent submit.
        this.view.showBanner("Connection lost; submit queued for retry…");
        this.view.setSubmitEnabled(this.canSubmit);
        this.opts.schedule(() => void this.submit(), this.opts.retryMs);
      }
    }
  }
}

// --- rendering helpers --------------------------------------------------------

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Markdown-style paragraphs: blank lines split, single newlines break. */
export function renderParagraphs(text: string): string {
  return text
    .split(/\n\s*\n/)
    .map((para) => `<p>${escapeHtml(para.trim()).replace(/\n/g, "<br>")}</p>`)
    .join("");
}

export function renderTranscript(transcript: Transcript): string {
  return transcript.entries
    .map(
      (entry) =>
        `<article class="entry entry-${escapeHtml(entry.kind)}">` +
        `<h4>${escapeHtml(entry.author)} <small>move ${entry.move_index}, ${escapeHtml(entry.kind)}</small></h4>` +
        renderParagraphs(entry.text) +
        `</article>`,
    )
    .join("");
}

// --- DOM wiring ----------------------------------------------------------------

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class DomView implements ConsoleView {
  showBanner(text: string | null): void {
    const banner = el<HTMLDivElement>("banner");
    banner.hidden = text === null;
    banner.textContent = text ?? "";
  }

  showPrompt(prompt: PendingPrompt | null): void {
    el<HTMLDivElement>("prompt-box").hidden = prompt === null;
    el<HTMLDivElement>("waiting").hidden = prompt !== null;
    el<HTMLDivElement>("prompt-text").innerHTML =
      prompt === null ? "" : renderParagraphs(prompt.prompt);
  }

  showTranscript(transcript: Transcript): void {
    const pane = el<HTMLDivElement>("transcript");
    const pinned = pane.scrollTop + pane.clientHeight >= pane.scrollHeight - 8;
    pane.innerHTML = renderTranscript(transcript);
    if (pinned) pane.scrollTop = pane.scrollHeight;
  }

  setSubmitEnabled(enabled: boolean): void {
    el<HTMLButtonElement>("submit").disabled = !enabled;
  }

  clearDraft(): void {
    el<HTMLTextAreaElement>("draft").value = "";
  }
}

function startSession(client: GatewayClient, agent: AgentInfo): void {
  el<HTMLElement>("agent-select").hidden = true;
  el<HTMLElement>("session").hidden = false;
  el<HTMLElement>("agent-name").textContent =
    agent.kind === "control" ? `${agent.id} (moderator)` : agent.id;
  const controller = new SessionController(client, new DomView(), agent.id);
  const draft = el<HTMLTextAreaElement>("draft");
  draft.addEventListener("input", () => controller.setDraft(draft.value));
  el<HTMLButtonElement>("submit").addEventListener("click", () => void controller.submit());
  void controller.run();
}

async function main(): Promise<void> {
  const client = new GatewayClient("");
  const banner = el<HTMLDivElement>("banner");
  let agents: AgentInfo[] = [];
  for (;;) {
    try {
      agents = await client.listAgents();
      banner.hidden = true;
      break;
    } catch {
      banner.hidden = false;
      banner.textContent = "Gateway unreachable; retrying…";
      await sleep(2000);
    }
  }
  if (agents.length === 0) {
    el<HTMLElement>("agent-select").hidden = true;
    el<HTMLElement>("empty-state").hidden = false;
    return;
  }
  const list = el<HTMLDivElement>("agent-list");
  for (const agent of agents) {
    const button = document.createElement("button");
    button.className = "agent-choice";
    button.textContent = agent.kind === "control" ? `${agent.id} (moderator)` : agent.id;
    button.addEventListener("click", () => startSession(client, agent));
    list.appendChild(button);
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

if (typeof document !== "undefined" && document.getElementById("agent-list") !== null) {
  void main();
}
