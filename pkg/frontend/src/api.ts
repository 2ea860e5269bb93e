import type {
  ChatReplyBody,
  ChatRequestBody,
  ExecuteRequestBody,
  ExecuteResponseBody,
  Finding,
  HealthBody,
  ProblemBody,
  ProblemSummary,
  SaveReply,
  SessionRequestBody,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly findings: Finding[] = [],
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

/** 401 from the service: the credential is missing or was rejected. */
export class AuthRequired extends ServiceError {}

/** 503 from the service: no solver toolchain behind the execute endpoint. */
export class ToolchainUnavailable extends ServiceError {}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function errorFrom(resp: Response): Promise<ServiceError> {
  let detail = `request failed with status ${resp.status}`;
  let findings: Finding[] = [];
  try {
    const body = await resp.json();
    if (typeof body?.detail === "string") detail = body.detail;
    if (Array.isArray(body?.findings)) findings = body.findings;
  } catch {
    // non-JSON error body; keep the generic message
  }
  if (resp.status === 401) return new AuthRequired(detail, 401);
  if (resp.status === 503) return new ToolchainUnavailable(detail, 503);
  return new ServiceError(detail, resp.status, findings);
}

export class ServiceClient {
  constructor(
    private readonly base = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as T;
  }

  private json(method: string, payload: unknown): RequestInit {
    return {
      method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    };
  }

  health(): Promise<HealthBody> {
    return this.request("/health");
  }

  listProblems(filters?: { source?: string; domain?: string; objective?: string }): Promise<
    ProblemSummary[]
  > {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters ?? {})) {
      if (value) params.set(key, value);
    }
    const query = params.toString();
    return this.request(`/problems${query ? `?${query}` : ""}`);
  }

  getProblem(id: string): Promise<ProblemBody> {
    return this.request(`/problems/${encodeURIComponent(id)}`);
  }

  putProblem(id: string, body: ProblemBody): Promise<SaveReply> {
    return this.request(`/problems/${encodeURIComponent(id)}`, this.json("PUT", body));
  }

  execute(id: string, req: ExecuteRequestBody): Promise<ExecuteResponseBody> {
    return this.request(
      `/problems/${encodeURIComponent(id)}/execute`,
      this.json("POST", req),
    );
  }

  createSession(req: SessionRequestBody): Promise<{ session_id: string }> {
    return this.request("/sessions", this.json("POST", req));
  }

  chat(sessionId: string, req: ChatRequestBody): Promise<ChatReplyBody> {
    return this.request(
      `/sessions/${encodeURIComponent(sessionId)}/chat`,
      this.json("POST", req),
    );
  }
}
