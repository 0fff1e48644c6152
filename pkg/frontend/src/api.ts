// Typed client for the human-gateway HTTP API. The console is a pure
// client: the only state-changing call is submitResponse.

export interface AgentInfo {
  id: string;
  kind: string;
}

export interface PendingPrompt {
  seq: number;
  prompt: string;
}

export interface TranscriptEntry {
  seq: number;
  author: string;
  kind: string;
  text: string;
  move_index: number;
  visibility: string | string[];
  degraded?: boolean;
}

export interface Transcript {
  format_version: number;
  entries: TranscriptEntry[];
}

export class StaleSeqError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "StaleSeqError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async listAgents(): Promise<AgentInfo[]> {
    const res = await this.fetchFn(`${this.baseUrl}/api/agents`);
    if (!res.ok) throw new Error(`agent list failed: ${res.status}`);
    const body = await res.json();
    return body.agents as AgentInfo[];
  }

  /** Long-polls the prompt endpoint; null when nothing is pending. */
  async pollPrompt(agentId: string, waitSeconds: number): Promise<PendingPrompt | null> {
    const url = `${this.baseUrl}/api/agents/${encodeURIComponent(agentId)}/prompt?wait=${waitSeconds}`;
    const res = await this.fetchFn(url);
    if (res.status === 404) return null;
    if (!res.ok) throw new Error(`prompt poll failed: ${res.status}`);
    return (await res.json()) as PendingPrompt;
  }

  async submitResponse(agentId: string, seq: number, text: string): Promise<void> {
    const url = `${this.baseUrl}/api/agents/${encodeURIComponent(agentId)}/response`;
    const res = await this.fetchFn(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ seq, text }),
    });
    if (res.status === 409) {
      throw new StaleSeqError(await safeDetail(res));
    }
    if (!res.ok) throw new Error(`submit failed (${res.status}): ${await safeDetail(res)}`);
  }

  /** Exactly the entries the gateway reports visible to this agent. */
  async transcript(agentId: string): Promise<Transcript> {
    const url = `${this.baseUrl}/api/transcript?agent=${encodeURIComponent(agentId)}`;
    const res = await this.fetchFn(url);
    if (!res.ok) throw new Error(`transcript fetch failed: ${res.status}`);
    return (await res.json()) as Transcript;
  }
}

async function safeDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body);
  } catch {
    return res.statusText;
  }
}
