import { DebugClient } from "./client.js";
import { SessionStore } from "./state.js";
import { mount } from "./dom.js";

const store = new SessionStore();
const client = new DebugClient(store, `ws://${location.host}`);
mount(document.getElementById("app")!, store, client);
