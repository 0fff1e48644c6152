// Typed client for the human-gateway HTTP API. The console is a pure
// client: the only state-changing call is submitResponse.
export class StaleSeqError extends Error {
    constructor(detail) {
        super(detail);
        this.name = "StaleSeqError";
    }
}
export class GatewayClient {
    constructor(baseUrl = "", fetchFn = (input, init) => fetch(input, init)) {
        this.baseUrl = baseUrl;
        this.fetchFn = fetchFn;
    }
    async listAgents() {
        const res = await this.fetchFn(`${this.baseUrl}/api/agents`);
        if (!res.ok)
            throw new Error(`agent list failed: ${res.status}`);
        const body = await res.json();
        return body.agents;
    }
    /** Long-polls the prompt endpoint; null when nothing is pending. */
    async pollPrompt(agentId, waitSeconds) {
        const url = `${this.baseUrl}/api/agents/${encodeURIComponent(agentId)}/prompt?wait=${waitSeconds}`;
        const res = await this.fetchFn(url);
        if (res.status === 404)
            return null;
        if (!res.ok)
            throw new Error(`prompt poll failed: ${res.status}`);
        return (await res.json());
    }
    async submitResponse(agentId, seq, text) {
        const url = `${this.baseUrl}/api/agents/${encodeURIComponent(agentId)}/response`;
        const res = await this.fetchFn(url, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ seq, text }),
        });
        if (res.status === 409) {
            throw new StaleSeqError(await safeDetail(res));
        }
        if (!res.ok)
            throw new Error(`submit failed (${res.status}): ${await safeDetail(res)}`);
    }
    /** Exactly the entries the gateway reports visible to this agent. */
    async transcript(agentId) {
        const url = `${this.baseUrl}/api/transcript?agent=${encodeURIComponent(agentId)}`;
        const res = await this.fetchFn(url);
        if (!res.ok)
            throw new Error(`transcript fetch failed: ${res.status}`);
        return (await res.json());
    }
}
async function safeDetail(res) {
    try {
        const body = await res.json();
        return typeof body.detail === "string" ? body.detail : JSON.stringify(body);
    }
    catch {
        return res.statusText;
    }
}
