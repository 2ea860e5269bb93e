import { describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api";
import { EditorStore } from "../src/state";
import { FakeService, makeProblem } from "./fake-service";

function setup(guard?: (message: string) => boolean) {
  const fake = new FakeService();
  fake.seed(makeProblem("mini_001"));
  fake.seed(
    makeProblem("sat_001", {
      model: "var 1..3: x;\nconstraint x >= 2;\nsolve satisfy;\n",
      output: { variables: { x: 2 } },
    }),
  );
  const store = new EditorStore(new ServiceClient("", fake.fetch), guard);
  return { fake, store };
}

describe("opening an instance", () => {
  it("seeds drafts from the service and starts clean", async () => {
    const { store } = setup();
    await store.open("mini_001");
    expect(store.state.draftInput?.description).toBe("Description of mini_001.");
    expect(store.state.modelDraft).toContain("solve minimize x;");
    expect(store.hasUnsaved()).toBe(false);
    expect(store.state.activeTab).toBe("Input");
  });

  it("guards against losing unsaved work", async () => {
    const asked: string[] = [];
    const { store } = setup((message) => {
      asked.push(message);
      return false;
    });
    await store.open("mini_001");
    store.setDescription("changed");
    await store.open("sat_001");
    expect(store.state.activeId).toBe("mini_001");
    expect(asked.length).toBe(1);
  });
});

describe("editing and saving", () => {
  it("marks the tab dirty and clears it only after a successful save", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    store.setDescription("A fresh description.");
    store.setVerified(true);
    expect(store.state.dirty.Input).toBe(true);

    expect(await store.save()).toBe(true);
    expect(store.state.dirty.Input).toBe(false);
    expect(fake.problems.get("mini_001")?.input.description).toBe("A fresh description.");
    expect(store.state.problems.find((p) => p.id === "mini_001")?.verified).toBe(true);
  });

  it("keeps dirty flags when the service rejects the save", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    store.addParameter();
    store.setParameter(0, "symbol", "K");
    store.setData("J = 3;\n");

    expect(await store.save()).toBe(false);
    expect(store.state.dirty.Input).toBe(true);
    expect(store.state.findings.some((f) => f.kind === "missing-symbol")).toBe(true);
    expect(fake.problems.get("mini_001")?.input.parameters).toHaveLength(0);
  });

  it("routes every save through the service", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    store.setModel("var 1..2: y;\nsolve satisfy;\n");
    await store.save();
    expect(fake.requests("PUT", "/problems/mini_001")).toHaveLength(1);
  });
});

describe("raw JSON mode", () => {
  it("round-trips to raw and back without edits", async () => {
    const { store } = setup();
    await store.open("mini_001");
    const before = JSON.stringify(store.state.draftInput);
    store.toggleRawMode();
    expect(store.state.rawMode).toBe(true);
    store.toggleRawMode();
    expect(store.state.rawMode).toBe(false);
    expect(JSON.stringify(store.state.draftInput)).toBe(before);
  });

  it("blocks saving while the JSON does not parse", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    store.toggleRawMode();
    store.setRawInput("{ not json");
    expect(await store.save()).toBe(false);
    expect(store.state.inputDiagnostic).toContain("does not parse");
    expect(fake.requests("PUT", "/problems/")).toHaveLength(0);
  });

  it("surfaces the service enum diagnostic for a bad objective", async () => {
    const { store } = setup();
    await store.open("mini_001");
    store.toggleRawMode();
    const raw = JSON.parse(store.state.rawInput);
    raw.metadata.objective = "optimize";
    store.setRawInput(JSON.stringify(raw));
    expect(await store.save()).toBe(false);
    expect(store.state.saveError).toContain("objective");
    expect(store.state.dirty.Input).toBe(true);
  });
});

describe("tab switching", () => {
  it("asks before leaving a dirty tab and stays when declined", async () => {
    let allow = false;
    const { store } = setup(() => allow);
    await store.open("mini_001");
    store.setDescription("edited");
    store.switchTab("Model");
    expect(store.state.activeTab).toBe("Input");
    allow = true;
    store.switchTab("Model");
    expect(store.state.activeTab).toBe("Model");
  });

  it("switches silently when nothing is unsaved", async () => {
    const { store } = setup(() => {
      throw new Error("guard must not fire");
    });
    await store.open("mini_001");
    store.switchTab("Execute");
    expect(store.state.activeTab).toBe("Execute");
  });
});

describe("execute panel", () => {
  it("runs with the current drafts and keeps history across solver switches", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    await store.runExecute();
    store.setSolver("chuffed");
    await store.runExecute();

    expect(store.state.history).toHaveLength(2);
    expect(store.state.history.map((h) => h.solver)).toEqual(["chuffed", "gecode"]);
    expect(store.state.history[0].response.verdict).toBe("match");
    const posts = fake.requests("POST", "/problems/mini_001/execute");
    expect(posts).toHaveLength(2);
    expect((posts[0].body as { model: string }).model).toContain("solve minimize x;");
  });

  it("refuses to run with an empty model tab", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    store.setModel("   ");
    await store.runExecute();
    expect(store.state.executeError).toContain("empty");
    expect(fake.requests("POST", "/problems/mini_001/execute")).toHaveLength(0);
  });

  it("turns a 503 into the toolchain banner, not an error dialog", async () => {
    const { fake, store } = setup();
    fake.toolchainDown = true;
    await store.open("mini_001");
    await store.runExecute();
    expect(store.state.toolchainDown).toBe(true);
    expect(store.state.history).toHaveLength(0);
  });
});

describe("chat panel", () => {
  it("refuses to send without a credential and never opens a session", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    await store.sendChat("hello");
    expect(store.state.needCredential).toBe(true);
    expect(fake.requests("POST", "/sessions")).toHaveLength(0);
  });

  it("attaches the active instance as context", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    store.setCredential("sk-test-1");
    await store.sendChat("what is x?");

    expect(store.state.transcript.map((t) => t.role)).toEqual(["user", "assistant"]);
    expect(store.state.chatContextId).toBe("mini_001");
    const opened = fake.requests("POST", "/sessions").filter((r) => r.path === "/sessions");
    expect(opened).toHaveLength(1);
    expect((opened[0].body as { instance_id: string }).instance_id).toBe("mini_001");
  });

  it("carries unsaved model text only when the model tab is dirty", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    store.setCredential("sk-test-1");
    await store.sendChat("first");
    store.setModel("var 1..9: z;\nsolve satisfy;\n");
    await store.sendChat("second");

    const chats = fake.log.filter((r) => r.path.endsWith("/chat"));
    expect(chats).toHaveLength(2);
    expect((chats[0].body as { model_override?: string }).model_override).toBeUndefined();
    expect((chats[1].body as { model_override?: string }).model_override).toContain("var 1..9: z;");
  });

  it("renders a rejected credential as a new credential prompt", async () => {
    const { fake, store } = setup();
    fake.rejectCredentials = true;
    await store.open("mini_001");
    store.setCredential("sk-bad");
    await store.sendChat("hello");
    expect(store.state.credentialSet).toBe(false);
    expect(store.state.needCredential).toBe(true);
    expect(store.state.chatError).toContain("rejected");
  });

  it("starts a fresh session when the credential changes", async () => {
    const { fake, store } = setup();
    await store.open("mini_001");
    store.setCredential("sk-one");
    await store.sendChat("first");
    store.setCredential("sk-two");
    await store.sendChat("second");
    const opened = fake.requests("POST", "/sessions").filter((r) => r.path === "/sessions");
    expect(opened).toHaveLength(2);
  });
});
