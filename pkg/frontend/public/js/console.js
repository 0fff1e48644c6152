// Player console: pick an agent, wait for prompts, answer them.
// One session per tab; if two tabs share an agent the first submit wins
// and the second sees the stale-seq banner.
import { GatewayClient, StaleSeqError, } from "./api.js";
const DEFAULTS = {
    pollSeconds: 25,
    idleMs: 2000,
    retryMs: 2000,
    schedule: (fn, ms) => setTimeout(fn, ms),
};
export class SessionController {
    constructor(client, view, agentId, opts = {}) {
        this.client = client;
        this.view = view;
        this.agentId = agentId;
        this.pending = null;
        this.draft = "";
        this.stopped = false;
        this.opts = { ...DEFAULTS, ...opts };
    }
    get canSubmit() {
        return this.pending !== null && this.draft.trim().length > 0;
    }
    setDraft(text) {
        this.draft = text;
        this.view.setSubmitEnabled(this.canSubmit);
    }
    stop() {
        this.stopped = true;
    }
    /** One cycle: (long-)poll for a prompt if idle, then refresh the view. */
    async tick() {
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
    async run() {
        while (!this.stopped) {
            try {
                await this.tick();
                this.view.showBanner(null);
                if (this.pending !== null) {
                    await sleep(this.opts.idleMs); // waiting on the human, not the gateway
                }
            }
            catch {
                this.view.showBanner("Gateway unreachable; retrying…");
                await sleep(this.opts.retryMs);
            }
        }
    }
    async submit() {
        if (!this.canSubmit || this.pending === null)
            return;
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
        }
        catch (err) {
            if (err instanceof StaleSeqError) {
                // Someone else answered this prompt; pick up whatever is pending now.
                this.view.showBanner("That prompt was already answered; refreshing.");
                this.pending = await this.client.pollPrompt(this.agentId, 0);
                this.view.showPrompt(this.pending);
                this.view.setSubmitEnabled(this.canSubmit);
            }
            else {
                // Network trouble: keep the draft and retry the unsent submit.
                this.view.showBanner("Connection lost; submit queued for retry…");
                this.view.setSubmitEnabled(this.canSubmit);
                this.opts.schedule(() => void this.submit(), this.opts.retryMs);
            }
        }
    }
}
// --- rendering helpers --------------------------------------------------------
export function escapeHtml(text) {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
/** Markdown-style paragraphs: blank lines split, single newlines break. */
export function renderParagraphs(text) {
    return text
        .split(/\n\s*\n/)
        .map((para) => `<p>${escapeHtml(para.trim()).replace(/\n/g, "<br>")}</p>`)
        .join("");
}
export function renderTranscript(transcript) {
    return transcript.entries
        .map((entry) => `<article class="entry entry-${escapeHtml(entry.kind)}">` +
        `<h4>${escapeHtml(entry.author)} <small>move ${entry.move_index}, ${escapeHtml(entry.kind)}</small></h4>` +
        renderParagraphs(entry.text) +
        `</article>`)
        .join("");
}
// --- DOM wiring ----------------------------------------------------------------
function el(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing element #${id}`);
    return node;
}
class DomView {
    showBanner(text) {
        const banner = el("banner");
        banner.hidden = text === null;
        banner.textContent = text ?? "";
    }
    showPrompt(prompt) {
        el("prompt-box").hidden = prompt === null;
        el("waiting").hidden = prompt !== null;
        el("prompt-text").innerHTML =
            prompt === null ? "" : renderParagraphs(prompt.prompt);
    }
    showTranscript(transcript) {
        const pane = el("transcript");
        const pinned = pane.scrollTop + pane.clientHeight >= pane.scrollHeight - 8;
        pane.innerHTML = renderTranscript(transcript);
        if (pinned)
            pane.scrollTop = pane.scrollHeight;
    }
    setSubmitEnabled(enabled) {
        el("submit").disabled = !enabled;
    }
    clearDraft() {
        el("draft").value = "";
    }
}
function startSession(client, agent) {
    el("agent-select").hidden = true;
    el("session").hidden = false;
    el("agent-name").textContent =
        agent.kind === "control" ? `${agent.id} (moderator)` : agent.id;
    const controller = new SessionController(client, new DomView(), agent.id);
    const draft = el("draft");
    draft.addEventListener("input", () => controller.setDraft(draft.value));
    el("submit").addEventListener("click", () => void controller.submit());
    void controller.run();
}
async function main() {
    const client = new GatewayClient("");
    const banner = el("banner");
    let agents = [];
    for (;;) {
        try {
            agents = await client.listAgents();
            banner.hidden = true;
            break;
        }
        catch {
            banner.hidden = false;
            banner.textContent = "Gateway unreachable; retrying…";
            await sleep(2000);
        }
    }
    if (agents.length === 0) {
        el("agent-select").hidden = true;
        el("empty-state").hidden = false;
        return;
    }
    const list = el("agent-list");
    for (const agent of agents) {
        const button = document.createElement("button");
        button.className = "agent-choice";
        button.textContent = agent.kind === "control" ? `${agent.id} (moderator)` : agent.id;
        button.addEventListener("click", () => startSession(client, agent));
        list.appendChild(button);
    }
}
function sleep(ms) {
    return new Promise((resolve) => setTimeout(resolve, ms));
}
if (typeof document !== "undefined" && document.getElementById("agent-list") !== null) {
    void main();
}
