import type { EditorStore, Tab, ViewState } from "./state.js";
import { TABS } from "./state.js";

const SOLVERS = ["gecode", "chuffed", "coin-bc", "highs"];

const SKELETON = `
<div class="layout">
  <aside class="sidebar">
    <h1>Corpus editor</h1>
    <div id="toolchain-banner" class="banner hidden">Solver toolchain unavailable; execute is disabled.</div>
    <ul id="problem-list"></ul>
  </aside>
  <main class="workspace">
    <nav id="tab-bar"></nav>
    <section id="panel-Input" class="panel">
      <div id="structured-input">
        <label>Title <input id="meta-title"></label>
        <label>Domain <input id="meta-domain"></label>
        <label>Objective
          <select id="meta-objective">
            <option>satisfy</option><option>minimize</option><option>maximize</option>
          </select>
        </label>
        <label>Description <textarea id="desc-input" rows="6"></textarea></label>
        <h3>Parameters</h3>
        <table id="params-table"></table>
        <button id="param-add" type="button">Add parameter</button>
        <label class="check"><input id="verified-check" type="checkbox"> verified</label>
      </div>
      <button id="raw-toggle" type="button">Edit raw JSON</button>
      <textarea id="raw-editor" class="hidden" rows="18"></textarea>
      <div id="input-diag" class="diag"></div>
      <ul id="findings-list"></ul>
    </section>
    <section id="panel-Data" class="panel">
      <label>Data file <textarea id="data-editor" rows="16" spellcheck="false"></textarea></label>
    </section>
    <section id="panel-Model" class="panel">
      <label>Model <textarea id="model-editor" rows="20" spellcheck="false"></textarea></label>
    </section>
    <section id="panel-Execute" class="panel">
      <div class="exec-controls">
        <label>Solver <select id="solver-select"></select></label>
        <label>Timeout (s) <input id="timeout-input" type="number" min="1" max="600"></label>
        <button id="run-btn" type="button">Run</button>
      </div>
      <div id="run-badge"></div>
      <div id="run-result"></div>
      <div id="execute-error" class="diag"></div>
      <h3>History</h3>
      <ol id="run-history"></ol>
    </section>
    <footer class="save-bar">
      <button id="save-btn" type="button">Save</button>
      <span id="save-status"></span>
    </footer>
  </main>
  <aside class="chat">
    <h2>Assistant</h2>
    <div id="chat-context"></div>
    <div class="credential-row">
      <input id="cred-input" type="password" placeholder="API key" autocomplete="off">
      <button id="cred-btn" type="button">Use key</button>
    </div>
    <div id="cred-state"></div>
    <div id="chat-log"></div>
    <div id="chat-error" class="diag"></div>
    <div class="chat-compose">
      <input id="chat-input" placeholder="Ask about this problem">
      <button id="chat-send" type="button">Send</button>
    </div>
  </aside>
</div>
`;

function syncValue(el: HTMLInputElement | HTMLTextAreaElement | HTMLSelectElement, value: string): void {
  // do not clobber the field the user is typing into
  if (document.activeElement === el) return;
  if (el.value !== value) el.value = value;
}

export function mount(root: HTMLElement, store: EditorStore): void {
  root.innerHTML = SKELETON;
  const $ = <T extends HTMLElement>(id: string): T => {
    const el = root.querySelector<T>(`#${id}`);
    if (!el) throw new Error(`missing element #${id}`);
    return el;
  };

  const tabBar = $("tab-bar");
  for (const tab of TABS) {
    const button = document.createElement("button");
    button.type = "button";
    button.dataset.tab = tab;
    button.addEventListener("click", () => store.switchTab(tab));
    tabBar.appendChild(button);
  }

  const solverSelect = $<HTMLSelectElement>("solver-select");
  for (const solver of SOLVERS) {
    const option = document.createElement("option");
    option.value = solver;
    option.textContent = solver;
    solverSelect.appendChild(option);
  }

  const problemList = $("problem-list");
  problemList.addEventListener("click", (event) => {
    const item = (event.target as HTMLElement).closest("li");
    if (item?.dataset.id) void store.open(item.dataset.id);
  });

  const onInput = (id: string, handler: (value: string) => void): void => {
    const el = $<HTMLInputElement | HTMLTextAreaElement>(id);
    el.addEventListener("input", () => handler(el.value));
  };
  onInput("meta-title", (v) => store.setMetadataField("title", v));
  onInput("meta-domain", (v) => store.setMetadataField("domain", v));
  onInput("desc-input", (v) => store.setDescription(v));
  onInput("raw-editor", (v) => store.setRawInput(v));
  onInput("data-editor", (v) => store.setData(v));
  onInput("model-editor", (v) => store.setModel(v));
  $<HTMLSelectElement>("meta-objective").addEventListener("change", (event) =>
    store.setMetadataField("objective", (event.target as HTMLSelectElement).value),
  );
  $<HTMLInputElement>("verified-check").addEventListener("change", (event) =>
    store.setVerified((event.target as HTMLInputElement).checked),
  );

  const paramsTable = $("params-table");
  paramsTable.addEventListener("input", (event) => {
    const cell = event.target as HTMLInputElement;
    const index = Number(cell.dataset.index);
    const field = cell.dataset.field;
    if (field === "definition" || field === "symbol") {
      store.setParameter(index, field, cell.value);
    }
  });
  paramsTable.addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>("button[data-remove]");
    if (button) store.removeParameter(Number(button.dataset.remove));
  });
  $("param-add").addEventListener("click", () => store.addParameter());

  $("raw-toggle").addEventListener("click", () => store.toggleRawMode());
  $("save-btn").addEventListener("click", () => void store.save());

  solverSelect.addEventListener("change", () => store.setSolver(solverSelect.value));
  $<HTMLInputElement>("timeout-input").addEventListener("input", (event) => {
    const seconds = Number((event.target as HTMLInputElement).value);
    if (Number.isFinite(seconds) && seconds > 0) store.setTimeoutSeconds(seconds);
  });
  $("run-btn").addEventListener("click", () => void store.runExecute());

  const credInput = $<HTMLInputElement>("cred-input");
  $("cred-btn").addEventListener("click", () => {
    store.setCredential(credInput.value);
    credInput.value = ""; // the key lives in store memory only, not in the DOM
  });

  const chatInput = $<HTMLInputElement>("chat-input");
  const send = async (): Promise<void> => {
    const message = chatInput.value;
    const before = store.state.transcript.length;
    await store.sendChat(message);
    if (store.state.transcript.length > before) chatInput.value = "";
  };
  $("chat-send").addEventListener("click", () => void send());
  chatInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void send();
  });

  const render = (): void => renderState(root, store.state);
  store.subscribe(render);
  render();
}

function renderState(root: HTMLElement, state: ViewState): void {
  const $ = <T extends HTMLElement>(id: string): T => root.querySelector<T>(`#${id}`)!;

  const list = $("problem-list");
  list.textContent = "";
  for (const row of state.problems) {
    const item = document.createElement("li");
    item.dataset.id = row.id;
    if (row.id === state.activeId) item.classList.add("active");
    const title = document.createElement("span");
    title.textContent = `${row.title} (${row.objective})`;
    item.appendChild(title);
    if (row.verified) {
      const badge = document.createElement("span");
      badge.className = "verified-badge";
      badge.textContent = "verified";
      item.appendChild(badge);
    }
    list.appendChild(item);
  }

  for (const button of root.querySelectorAll<HTMLButtonElement>("#tab-bar button")) {
    const tab = button.dataset.tab as Tab;
    const dirty = tab !== "Execute" && state.dirty[tab];
    button.textContent = dirty ? `${tab} *` : tab;
    button.classList.toggle("active", tab === state.activeTab);
  }
  for (const tab of TABS) {
    $(`panel-${tab}`).classList.toggle("hidden", tab !== state.activeTab);
  }

  const input = state.draftInput;
  $("structured-input").classList.toggle("hidden", state.rawMode);
  $("raw-editor").classList.toggle("hidden", !state.rawMode);
  $("raw-toggle").textContent = state.rawMode ? "Back to form" : "Edit raw JSON";
  if (input) {
    syncValue($<HTMLInputElement>("meta-title"), input.metadata.title);
    syncValue($<HTMLInputElement>("meta-domain"), input.metadata.domain);
    syncValue($<HTMLSelectElement>("meta-objective"), input.metadata.objective);
    syncValue($<HTMLTextAreaElement>("desc-input"), input.description);
    const verified = $<HTMLInputElement>("verified-check");
    if (verified.checked !== input.verified) verified.checked = input.verified;

    const table = $("params-table");
    table.textContent = "";
    input.parameters.forEach((param, index) => {
      const row = document.createElement("tr");
      for (const field of ["symbol", "definition"] as const) {
        const cell = document.createElement("td");
        const box = document.createElement("input");
        box.value = param[field];
        box.dataset.index = String(index);
        box.dataset.field = field;
        box.placeholder = field;
        cell.appendChild(box);
        row.appendChild(cell);
      }
      const actions = document.createElement("td");
      const remove = document.createElement("button");
      remove.type = "button";
      remove.dataset.remove = String(index);
      remove.textContent = "remove";
      actions.appendChild(remove);
      row.appendChild(actions);
      table.appendChild(row);
    });
  }
  syncValue($<HTMLTextAreaElement>("raw-editor"), state.rawInput);
  syncValue($<HTMLTextAreaElement>("data-editor"), state.dataDraft);
  syncValue($<HTMLTextAreaElement>("model-editor"), state.modelDraft);

  $("input-diag").textContent = state.inputDiagnostic ?? "";
  const findings = $("findings-list");
  findings.textContent = "";
  for (const finding of state.findings) {
    const item = document.createElement("li");
    item.textContent = `${finding.kind} (${finding.symbol}): ${finding.detail}`;
    findings.appendChild(item);
  }

  const saveStatus = $("save-status");
  if (state.saving) saveStatus.textContent = "saving";
  else if (state.saveError) saveStatus.textContent = state.saveError;
  else if (!state.detail) saveStatus.textContent = "";
  else if (state.dirty.Input || state.dirty.Data || state.dirty.Model)
    saveStatus.textContent = "unsaved changes";
  else saveStatus.textContent = "all changes saved";
  saveStatus.classList.toggle("diag", Boolean(state.saveError));

  syncValue($<HTMLSelectElement>("solver-select"), state.solver);
  syncValue($<HTMLInputElement>("timeout-input"), String(state.timeout));
  ($<HTMLButtonElement>("run-btn")).disabled = state.running || state.toolchainDown;
  $("toolchain-banner").classList.toggle("hidden", !state.toolchainDown);
  $("execute-error").textContent = state.executeError ?? "";

  const badge = $("run-badge");
  const latest = state.history[0];
  if (latest) {
    badge.textContent = latest.response.verdict;
    badge.className = `badge badge-${latest.response.verdict}`;
    $("run-result").textContent = "";
    $("run-result").appendChild(describeRun(latest.response));
  } else {
    badge.textContent = "";
    badge.className = "badge";
    $("run-result").textContent = "";
  }

  const historyList = $("run-history");
  historyList.textContent = "";
  for (const entry of state.history) {
    const item = document.createElement("li");
    item.textContent =
      `${entry.solver}, ${entry.timeout}s: ${entry.response.result.status} ` +
      `(${entry.response.verdict})`;
    historyList.appendChild(item);
  }

  $("chat-context").textContent = state.chatContextId
    ? `context: ${state.chatContextId}`
    : "no instance attached";
  const credState = $("cred-state");
  if (state.credentialSet) credState.textContent = "credential set (memory only)";
  else if (state.needCredential) credState.textContent = "enter an API key to chat";
  else credState.textContent = "no credential";
  credState.classList.toggle("diag", state.needCredential);

  const log = $("chat-log");
  log.textContent = "";
  for (const turn of state.transcript) {
    const line = document.createElement("div");
    line.className = `turn turn-${turn.role}`;
    line.textContent = `${turn.role === "user" ? "You" : "Assistant"}: ${turn.text}`;
    log.appendChild(line);
  }
  $("chat-error").textContent = state.chatError ?? "";
  ($<HTMLButtonElement>("chat-send")).disabled = !state.credentialSet || state.chatBusy;
}

function describeRun(response: {
  result: {
    status: string;
    objective: number | null;
    wall_seconds: number;
    assignments: Record<string, unknown>;
    error: { category: string; text: string } | null;
  };
  detail: { expected_objective: number | null };
}): HTMLElement {
  const box = document.createElement("dl");
  const push = (label: string, value: string): void => {
    const dt = document.createElement("dt");
    dt.textContent = label;
    const dd = document.createElement("dd");
    dd.textContent = value;
    box.append(dt, dd);
  };
  push("status", response.result.status);
  if (response.result.objective !== null) {
    const expected = response.detail.expected_objective;
    push(
      "objective",
      expected === null
        ? String(response.result.objective)
        : `${response.result.objective} (expected ${expected})`,
    );
  }
  push("wall time", `${response.result.wall_seconds.toFixed(3)}s`);
  if (response.result.error) {
    push("error", `${response.result.error.category}: ${response.result.error.text}`);
  }
  const assignments = Object.entries(response.result.assignments);
  if (assignments.length) {
    push(
      "assignments",
      assignments.map(([name, value]) => `${name} = ${JSON.stringify(value)}`).join("; "),
    );
  }
  return box;
}
