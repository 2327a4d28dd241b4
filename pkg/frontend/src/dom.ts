/**
 * Minimal DOM renderer for the view model. Rebuilds the affected panes
 * on every store change; the pure view layer keeps this dumb.
 */

import { DebugClient } from "./client.js";
import { SessionStore } from "./state.js";
import { VariableView, ViewModel, view } from "./view.js";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className !== undefined) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function mount(root: HTMLElement, store: SessionStore,
                      client: DebugClient): void {
  root.innerHTML = `
    <div id="toolbar"></div>
    <div id="main">
      <div id="source-pane"></div>
      <div id="side">
        <div id="stack-pane"><h2>Call stack</h2><ul></ul></div>
        <div id="scopes-pane"><h2>Scopes</h2><div></div></div>
        <div id="breakpoints-pane"><h2>Breakpoints</h2><ul></ul></div>
      </div>
    </div>
    <pre id="output"></pre>
    <div id="status"></div>`;
  const render = () => renderAll(root, view(store), client);
  store.subscribe(render);
  render();
}

function renderAll(root: HTMLElement, vm: ViewModel,
                   client: DebugClient): void {
  renderToolbar(root.querySelector("#toolbar")!, vm, client);
  renderSource(root.querySelector("#source-pane")!, vm, client);
  renderStack(root.querySelector("#stack-pane ul")!, vm, client);
  renderScopes(root.querySelector("#scopes-pane div")!, vm, client);
  renderBreakpoints(root.querySelector("#breakpoints-pane ul")!, vm, client);
  root.querySelector("#output")!.textContent = vm.output;
  const status = root.querySelector("#status")!;
  status.textContent = vm.error === null ? vm.status
    : `${vm.status} — ${vm.error}`;
}

const BUTTONS: Array<[string, string]> = [
  ["continue", "Continue"],
  ["stepExpr", "Step expression"],
  ["stepInto", "Step into"],
  ["stepOver", "Step over"],
  ["stepOut", "Step out"],
];

function renderToolbar(pane: Element, vm: ViewModel,
                       client: DebugClient): void {
  pane.innerHTML = "";
  for (const [mode, label] of BUTTONS) {
    const b = el("button", "step", label) as HTMLButtonElement;
    b.disabled = !vm.controls.canResume;
    b.onclick = () => client.resume(mode as Parameters<DebugClient["resume"]>[0]);
    pane.appendChild(b);
  }
  const pauseBtn = el("button", "pause", "Pause") as HTMLButtonElement;
  pauseBtn.disabled = !vm.controls.canPause;
  pauseBtn.onclick = () => client.pause();
  pane.appendChild(pauseBtn);
}

function renderSource(pane: Element, vm: ViewModel,
                      client: DebugClient): void {
  pane.innerHTML = "";
  if (vm.source === null) {
    pane.appendChild(el("div", "placeholder", "no source selected"));
    return;
  }
  if (!vm.source.available) {
    pane.appendChild(el("div", "placeholder",
                        `source not available: ${vm.source.file}`));
    return;
  }
  const title = el("div", "filename", vm.source.file);
  pane.appendChild(title);
  const table = el("div", "code");
  for (const line of vm.source.lines) {
    const row = el("div", line.highlighted ? "line current" : "line");
    const gutter = el("span",
                      line.hasBreakpoint ? "gutter bp" : "gutter",
                      String(line.number));
    gutter.onclick = () =>
      client.toggleBreakpoint(vm.source!.file, line.number);
    row.appendChild(gutter);
    const text = el("span", "text");
    // inline markers sit at resolved statement columns only
    let cursor = 1;
    const ordered = [...line.markers].sort((a, b) => a.column - b.column);
    for (const marker of ordered) {
      const col = Math.min(marker.column, line.text.length + 1);
      text.appendChild(document.createTextNode(
        line.text.slice(cursor - 1, col - 1)));
      const dot = el("span", `marker ${marker.breakpoint}`, "◆");
      dot.onclick = () =>
        client.toggleBreakpoint(vm.source!.file, line.number, marker.column);
      text.appendChild(dot);
      cursor = col;
    }
    text.appendChild(document.createTextNode(line.text.slice(cursor - 1)));
    row.appendChild(text);
    table.appendChild(row);
  }
  pane.appendChild(table);
}

function renderStack(list: Element, vm: ViewModel,
                     client: DebugClient): void {
  list.innerHTML = "";
  for (const entry of vm.stack) {
    const item = el("li", entry.selected ? "frame selected" : "frame",
                    entry.label);
    item.onclick = () => client.selectFrame(entry.frameId);
    const restart = el("button", "restart", "Restart frame");
    restart.onclick = (ev) => {
      ev.stopPropagation();
      client.restartFrame(entry.frameId);
    };
    item.appendChild(restart);
    list.appendChild(item);
  }
}

function renderScopes(pane: Element, vm: ViewModel,
                      client: DebugClient): void {
  pane.innerHTML = "";
  for (const scope of vm.scopes) {
    const box = el("div", "scope");
    box.appendChild(el("h3", undefined, scope.name));
    if (scope.variables === null) {
      client.fetchScopeVariables(scope.ref);
      box.appendChild(el("div", "loading", "..."));
    } else {
      box.appendChild(renderVariables(scope.variables, client));
    }
    pane.appendChild(box);
  }
}

function renderVariables(variables: VariableView[],
                         client: DebugClient): HTMLElement {
  const list = el("ul", "variables");
  for (const v of variables) {
    const item = el("li", "variable");
    item.appendChild(el("span", "name", v.name));
    item.appendChild(el("span", "type", v.type));
    item.appendChild(el("span", "value", v.value));
    if (v.expandable) {
      if (v.children === null) {
        const expand = el("button", "expand", "+");
        expand.onclick = () => client.expandVariable(v.ref);
        item.appendChild(expand);
      } else {
        item.appendChild(renderVariables(v.children, client));
      }
    }
    list.appendChild(item);
  }
  return list;
}

function renderBreakpoints(list: Element, vm: ViewModel,
                           client: DebugClient): void {
  list.innerHTML = "";
  for (const bp of vm.breakpointList) {
    const item = el("li", "breakpoint");
    const box = el("input") as HTMLInputElement;
    box.type = "checkbox";
    box.checked = bp.enabled;
    box.onchange = () => client.setBreakpointEnabled(bp.id, box.checked);
    item.appendChild(box);
    item.appendChild(el("span", undefined, bp.label));
    list.appendChild(item);
  }
}
