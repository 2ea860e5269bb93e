// Drives the mounted UI the way a person would: real DOM nodes, real event
// dispatch, with the in-memory service standing in for the corpus backend.
import { beforeEach, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api";
import { EditorStore } from "../src/state";
import { mount } from "../src/view";
import { FakeService, makeProblem } from "./fake-service";

async function settle(rounds = 4): Promise<void> {
  for (let i = 0; i < rounds; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

let fake: FakeService;
let store: EditorStore;
let root: HTMLElement;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = root.querySelector<T>(`#${id}`);
  if (!el) throw new Error(`missing #${id}`);
  return el;
};

function type(id: string, value: string): void {
  const el = $<HTMLInputElement | HTMLTextAreaElement>(id);
  el.value = value;
  el.dispatchEvent(new Event("input", { bubbles: true }));
}

function tabButton(tab: string): HTMLButtonElement {
  const button = root.querySelector<HTMLButtonElement>(`#tab-bar button[data-tab="${tab}"]`);
  if (!button) throw new Error(`missing tab ${tab}`);
  return button;
}

beforeEach(async () => {
  fake = new FakeService();
  fake.seed(makeProblem("ui_001"));
  store = new EditorStore(new ServiceClient("", fake.fetch), () => true);
  document.body.innerHTML = "";
  root = document.createElement("div");
  document.body.appendChild(root);
  mount(root, store);
  await store.refreshProblems();
  await settle();
});

describe("a full editing session", () => {
  it("opens, edits, verifies, saves, executes, and chats", async () => {
    // open the instance from the sidebar
    const entry = root.querySelector<HTMLLIElement>("#problem-list li");
    expect(entry?.textContent).toContain("Problem ui_001 (minimize)");
    entry!.click();
    await settle();
    expect($<HTMLTextAreaElement>("desc-input").value).toBe("Description of ui_001.");

    // edit the description and tick verified
    type("desc-input", "Pick the smallest eligible x.");
    const verified = $<HTMLInputElement>("verified-check");
    verified.checked = true;
    verified.dispatchEvent(new Event("change", { bubbles: true }));
    expect(tabButton("Input").textContent).toBe("Input *");
    expect($("save-status").textContent).toBe("unsaved changes");

    // save through the service and watch the list pick up the badge
    $("save-btn").click();
    await settle();
    expect($("save-status").textContent).toBe("all changes saved");
    expect(tabButton("Input").textContent).toBe("Input");
    expect(root.querySelector("#problem-list .verified-badge")?.textContent).toBe("verified");
    expect(fake.problems.get("ui_001")?.input.description).toBe("Pick the smallest eligible x.");

    // run with a chosen solver and timeout
    tabButton("Execute").click();
    expect($("panel-Execute").classList.contains("hidden")).toBe(false);
    const solver = $<HTMLSelectElement>("solver-select");
    solver.value = "chuffed";
    solver.dispatchEvent(new Event("change", { bubbles: true }));
    type("timeout-input", "5");
    $("run-btn").click();
    await settle();

    const badge = $("run-badge");
    expect(badge.textContent).toBe("match");
    expect(badge.classList.contains("badge-match")).toBe(true);
    expect($("run-history").textContent).toContain("chuffed, 5s: Optimal (match)");
    const sent = fake.requests("POST", "/problems/ui_001/execute");
    expect(sent).toHaveLength(1);
    expect(sent[0].body).toMatchObject({ solver: "chuffed", timeout: 5 });

    // chat refuses without a credential
    expect($<HTMLButtonElement>("chat-send").disabled).toBe(true);
    expect($("cred-state").textContent).toBe("no credential");
    expect(fake.requests("POST", "/sessions")).toHaveLength(0);

    // supply a key; it never stays in the input field
    type("cred-input", "sk-ui-123");
    $("cred-btn").click();
    expect($<HTMLInputElement>("cred-input").value).toBe("");
    expect($("cred-state").textContent).toBe("credential set (memory only)");
    expect($<HTMLButtonElement>("chat-send").disabled).toBe(false);

    // the conversation carries the open instance as context
    type("chat-input", "why minimize?");
    $("chat-send").click();
    await settle();
    const log = $("chat-log").textContent ?? "";
    expect(log).toContain("You: why minimize?");
    expect(log).toContain("Assistant: try a smaller bound");
    expect($("chat-context").textContent).toBe("context: ui_001");
    const sessions = fake.requests("POST", "/sessions").filter((r) => r.path === "/sessions");
    expect(sessions).toHaveLength(1);
    expect(sessions[0].body).toMatchObject({ credential: "sk-ui-123", instance_id: "ui_001" });
    expect($<HTMLInputElement>("chat-input").value).toBe("");
  });
});

describe("execute panel feedback", () => {
  it("shows the classified error and a mismatch badge for a broken model", async () => {
    root.querySelector<HTMLLIElement>("#problem-list li")!.click();
    await settle();

    tabButton("Model").click();
    type("model-editor", "var 0..4: x BROKEN;\nsolve satisfy;\n");
    expect(tabButton("Model").textContent).toBe("Model *");

    tabButton("Execute").click();
    $("run-btn").click();
    await settle();

    expect($("run-badge").textContent).toBe("mismatch");
    expect($("run-badge").classList.contains("badge-mismatch")).toBe(true);
    expect($("run-result").textContent).toContain("SyntaxError: model.mzn:1.7");
    expect($("run-history").textContent).toContain("(mismatch)");
  });

  it("switches to the unavailable banner when the toolchain is gone", async () => {
    root.querySelector<HTMLLIElement>("#problem-list li")!.click();
    await settle();
    fake.toolchainDown = true;

    tabButton("Execute").click();
    $("run-btn").click();
    await settle();

    expect($("toolchain-banner").classList.contains("hidden")).toBe(false);
    expect($<HTMLButtonElement>("run-btn").disabled).toBe(true);
    expect($("run-history").children).toHaveLength(0);
  });
});
