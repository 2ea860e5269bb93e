// Wire shapes of the corpus service HTTP API. The UI talks to nothing else.

export interface ProblemSummary {
  id: string;
  title: string;
  domain: string;
  objective: string;
  verified: boolean;
}

export interface SpecRow {
  definition: string;
  symbol: string;
  shape: string[];
}

export interface InputMetadata {
  title: string;
  identifier: string;
  domain: string;
  objective: string;
  keywords: string[];
  subdomain?: string;
  [extra: string]: unknown;
}

export interface ProblemInputBody {
  description: string;
  parameters: SpecRow[];
  output: SpecRow[];
  metadata: InputMetadata;
  verified: boolean;
}

export interface ExpectedBody {
  objective?: number;
  variables?: Record<string, unknown>;
  unsatisfiable?: boolean;
  [extra: string]: unknown;
}

export interface ProblemBody {
  input: ProblemInputBody;
  data: string;
  model: string | null;
  output: ExpectedBody | null;
}

export interface Finding {
  kind: string;
  symbol: string;
  detail: string;
}

export interface SaveReply {
  saved: boolean;
  findings: Finding[];
}

export interface SolveErrorBody {
  category: string;
  text: string;
}

export interface SolveResultBody {
  status: string;
  objective: number | null;
  assignments: Record<string, unknown>;
  error: SolveErrorBody | null;
  wall_seconds: number;
  stdout: string;
  stderr: string;
}

export interface ExecuteRequestBody {
  solver: string;
  timeout: number;
  model?: string;
  data?: string;
  save?: boolean;
}

export interface ExecuteResponseBody {
  result: SolveResultBody;
  verdict: "match" | "mismatch";
  executed: boolean;
  detail: {
    kind: string;
    expected_objective: number | null;
    got_objective: number | null;
    verifier_verdict: boolean | null;
    note: string;
  };
  saved: boolean;
}

export interface SessionRequestBody {
  credential?: string;
  instance_id?: string;
}

export interface ChatRequestBody {
  message: string;
  instance_id?: string;
  model_override?: string;
}

export interface ChatReplyBody {
  reply: string;
  instance_id: string | null;
  turns: number;
}

export interface HealthBody {
  status: string;
  toolchain: boolean;
  instances: number;
}
