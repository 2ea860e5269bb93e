import { ServiceClient } from "./api.js";
import { EditorStore } from "./state.js";
import { mount } from "./view.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const client = new ServiceClient("");
const store = new EditorStore(client, (message) => window.confirm(message));
mount(root, store);

void (async () => {
  try {
    const health = await client.health();
    if (!health.toolchain) store.state.toolchainDown = true;
  } catch {
    // health probe is advisory; the list call surfaces real failures
  }
  await store.refreshProblems();
})();
