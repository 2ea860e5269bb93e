import { AuthRequired, ServiceClient, ServiceError, ToolchainUnavailable } from "./api.js";
import type {
  ChatRequestBody,
  ExecuteRequestBody,
  ExecuteResponseBody,
  Finding,
  ProblemBody,
  ProblemInputBody,
  ProblemSummary,
} from "./types.js";

export type Tab = "Input" | "Data" | "Model" | "Execute";
export const TABS: readonly Tab[] = ["Input", "Data", "Model", "Execute"];

export type EditableTab = Exclude<Tab, "Execute">;

export interface RunEntry {
  solver: string;
  timeout: number;
  response: ExecuteResponseBody;
  at: string;
}

export interface ChatTurn {
  role: "user" | "assistant";
  text: string;
}

export interface ViewState {
  problems: ProblemSummary[];
  activeId: string | null;
  activeTab: Tab;
  detail: ProblemBody | null;
  draftInput: ProblemInputBody | null;
  rawMode: boolean;
  rawInput: string;
  dataDraft: string;
  modelDraft: string;
  dirty: Record<EditableTab, boolean>;
  inputDiagnostic: string | null;
  saveError: string | null;
  findings: Finding[];
  saving: boolean;
  solver: string;
  timeout: number;
  running: boolean;
  toolchainDown: boolean;
  executeError: string | null;
  history: RunEntry[];
  credentialSet: boolean;
  needCredential: boolean;
  chatContextId: string | null;
  transcript: ChatTurn[];
  chatError: string | null;
  chatBusy: boolean;
}

function initialState(): ViewState {
  return {
    problems: [],
    activeId: null,
    activeTab: "Input",
    detail: null,
    draftInput: null,
    rawMode: false,
    rawInput: "",
    dataDraft: "",
    modelDraft: "",
    dirty: { Input: false, Data: false, Model: false },
    inputDiagnostic: null,
    saveError: null,
    findings: [],
    saving: false,
    solver: "gecode",
    timeout: 60,
    running: false,
    toolchainDown: false,
    executeError: null,
    history: [],
    credentialSet: false,
    needCredential: false,
    chatContextId: null,
    transcript: [],
    chatError: null,
    chatBusy: false,
  };
}

const clone = <T>(value: T): T => JSON.parse(JSON.stringify(value)) as T;

/** Asks before leaving unsaved work; returning false keeps the user where they are. */
export type UnsavedGuard = (message: string) => boolean;

export class EditorStore {
  state: ViewState = initialState();
  // kept out of `state` so no render path can ever print it
  private credential: string | null = null;
  private sessionId: string | null = null;
  private listeners: Array<() => void> = [];

  constructor(
    private readonly client: ServiceClient,
    private readonly guard: UnsavedGuard = () => true,
  ) {}

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  hasUnsaved(): boolean {
    const { dirty } = this.state;
    return dirty.Input || dirty.Data || dirty.Model;
  }

  async refreshProblems(): Promise<void> {
    this.state.problems = await this.client.listProblems();
    this.emit();
  }

  async open(id: string): Promise<void> {
    if (this.state.activeId === id) return;
    if (this.hasUnsaved() && !this.guard("Discard unsaved changes?")) return;
    const detail = await this.client.getProblem(id);
    const s = this.state;
    s.activeId = id;
    s.activeTab = "Input";
    s.detail = detail;
    s.draftInput = clone(detail.input);
    s.rawMode = false;
    s.rawInput = "";
    s.dataDraft = detail.data;
    s.modelDraft = detail.model ?? "";
    s.dirty = { Input: false, Data: false, Model: false };
    s.inputDiagnostic = null;
    s.saveError = null;
    s.findings = [];
    s.history = [];
    s.executeError = null;
    this.emit();
  }

  switchTab(tab: Tab): void {
    const s = this.state;
    if (tab === s.activeTab) return;
    const leaving = s.activeTab;
    if (leaving !== "Execute" && s.dirty[leaving]) {
      if (!this.guard(`The ${leaving} tab has unsaved changes. Leave anyway?`)) return;
    }
    s.activeTab = tab;
    this.emit();
  }

  // -- Input tab --------------------------------------------------------

  setDescription(text: string): void {
    if (!this.state.draftInput) return;
    this.state.draftInput.description = text;
    this.touch("Input");
  }

  setVerified(verified: boolean): void {
    if (!this.state.draftInput) return;
    this.state.draftInput.verified = verified;
    this.touch("Input");
  }

  setMetadataField(field: "title" | "domain" | "objective", value: string): void {
    if (!this.state.draftInput) return;
    this.state.draftInput.metadata[field] = value;
    this.touch("Input");
  }

  setParameter(index: number, field: "definition" | "symbol", value: string): void {
    const row = this.state.draftInput?.parameters[index];
    if (!row) return;
    row[field] = value;
    this.touch("Input");
  }

  addParameter(): void {
    if (!this.state.draftInput) return;
    this.state.draftInput.parameters.push({ definition: "", symbol: "", shape: [] });
    this.touch("Input");
  }

  removeParameter(index: number): void {
    if (!this.state.draftInput) return;
    this.state.draftInput.parameters.splice(index, 1);
    this.touch("Input");
  }

  toggleRawMode(): void {
    const s = this.state;
    if (!s.rawMode) {
      s.rawInput = JSON.stringify(s.draftInput, null, 2);
      s.rawMode = true;
      s.inputDiagnostic = null;
      this.emit();
      return;
    }
    const parsed = this.parseRawInput();
    if (parsed === null) return; // diagnostic set; stay in raw mode
    s.draftInput = parsed;
    s.rawMode = false;
    this.emit();
  }

  setRawInput(text: string): void {
    this.state.rawInput = text;
    this.touch("Input");
  }

  private parseRawInput(): ProblemInputBody | null {
    try {
      const parsed = JSON.parse(this.state.rawInput) as ProblemInputBody;
      this.state.inputDiagnostic = null;
      return parsed;
    } catch (err) {
      this.state.inputDiagnostic = `input JSON does not parse: ${(err as Error).message}`;
      this.emit();
      return null;
    }
  }

  setData(text: string): void {
    this.state.dataDraft = text;
    this.touch("Data");
  }

  setModel(text: string): void {
    this.state.modelDraft = text;
    this.touch("Model");
  }

  private touch(tab: EditableTab): void {
    this.state.dirty[tab] = true;
    this.emit();
  }

  // -- persistence ------------------------------------------------------

  /** Every save goes through the service; nothing is written locally. */
  async save(): Promise<boolean> {
    const s = this.state;
    if (!s.activeId || !s.detail || s.saving) return false;
    let inputBody = s.draftInput;
    if (s.rawMode) {
      inputBody = this.parseRawInput();
      if (inputBody === null) return false;
    }
    if (!inputBody) return false;
    const body: ProblemBody = {
      input: inputBody,
      data: s.dataDraft,
      model: s.modelDraft.trim() ? s.modelDraft : null,
      output: s.detail.output,
    };
    s.saving = true;
    this.emit();
    try {
      const reply = await this.client.putProblem(s.activeId, body);
      s.detail = body;
      s.draftInput = clone(inputBody);
      if (s.rawMode) s.rawInput = JSON.stringify(inputBody, null, 2);
      s.dirty = { Input: false, Data: false, Model: false };
      s.findings = reply.findings;
      s.saveError = null;
      s.inputDiagnostic = null;
      await this.refreshProblems(); // the list shows the verified badge
      return true;
    } catch (err) {
      if (err instanceof ServiceError) {
        s.saveError = err.message;
        s.findings = err.findings;
        return false;
      }
      throw err;
    } finally {
      s.saving = false;
      this.emit();
    }
  }

  // -- execute panel ----------------------------------------------------

  setSolver(solver: string): void {
    this.state.solver = solver;
    this.emit();
  }

  setTimeoutSeconds(seconds: number): void {
    this.state.timeout = seconds;
    this.emit();
  }

  async runExecute(): Promise<void> {
    const s = this.state;
    if (!s.activeId || s.running) return;
    if (!s.modelDraft.trim()) {
      s.executeError = "the Model tab is empty; nothing to execute";
      this.emit();
      return;
    }
    const req: ExecuteRequestBody = {
      solver: s.solver,
      timeout: s.timeout,
      model: s.modelDraft,
      data: s.dataDraft,
    };
    s.running = true;
    s.executeError = null;
    this.emit();
    try {
      const response = await this.client.execute(s.activeId, req);
      s.history = [
        { solver: s.solver, timeout: s.timeout, response, at: new Date().toISOString() },
        ...s.history,
      ];
      s.toolchainDown = false;
    } catch (err) {
      if (err instanceof ToolchainUnavailable) {
        s.toolchainDown = true;
      } else if (err instanceof ServiceError) {
        s.executeError = err.message;
      } else {
        throw err;
      }
    } finally {
      s.running = false;
      this.emit();
    }
  }

  // -- chat panel -------------------------------------------------------

  setCredential(credential: string): void {
    const trimmed = credential.trim();
    this.credential = trimmed ? trimmed : null;
    this.sessionId = null; // a new key starts a fresh service session
    this.state.credentialSet = this.credential !== null;
    this.state.needCredential = false;
    this.state.chatError = null;
    this.emit();
  }

  canSend(): boolean {
    return this.state.credentialSet && !this.state.chatBusy;
  }

  async sendChat(message: string): Promise<void> {
    const s = this.state;
    const text = message.trim();
    if (!text || s.chatBusy) return;
    if (!this.credential) {
      s.needCredential = true;
      this.emit();
      return;
    }
    s.chatBusy = true;
    this.emit();
    try {
      if (!this.sessionId || s.chatContextId !== s.activeId) {
        const session = await this.client.createSession({
          credential: this.credential,
          ...(s.activeId ? { instance_id: s.activeId } : {}),
        });
        this.sessionId = session.session_id;
        s.chatContextId = s.activeId;
      }
      const req: ChatRequestBody = { message: text };
      if (s.dirty.Model) req.model_override = s.modelDraft; // latest unsaved model rides along
      const reply = await this.client.chat(this.sessionId, req);
      s.transcript = [
        ...s.transcript,
        { role: "user", text },
        { role: "assistant", text: reply.reply },
      ];
      s.chatError = null;
    } catch (err) {
      if (err instanceof AuthRequired) {
        this.credential = null;
        this.sessionId = null;
        s.credentialSet = false;
        s.needCredential = true;
        s.chatError = "the service rejected the credential; enter it again";
      } else if (err instanceof ServiceError) {
        s.chatError = err.message;
      } else {
        throw err;
      }
    } finally {
      s.chatBusy = false;
      this.emit();
    }
  }
}
