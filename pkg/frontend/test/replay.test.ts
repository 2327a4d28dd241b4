/**
 * Protocol-purity check: replaying a recorded request/response/event
 * transcript into the session store reproduces the rendered state a live
 * session produced, without any engine or network. Snapshots cover the
 * full view model; explicit assertions pin the load-bearing pieces
 * (markers, highlight, stack, scopes).
 */

import { readFileSync } from "node:fs";
import { describe, expect, test } from "vitest";

import { IncomingMessage, RequestMessage } from "../src/protocol.js";
import { SessionStore } from "../src/state.js";
import { ViewModel, view } from "../src/view.js";

interface TranscriptEntry {
  dir?: "send" | "recv";
  msg?: RequestMessage | IncomingMessage;
  checkpoint?: string;
}

const transcript: TranscriptEntry[] = JSON.parse(
  readFileSync(new URL("./transcript.json", import.meta.url), "utf-8"));

function replay(): Map<string, ViewModel> {
  const store = new SessionStore();
  store.connectionChanged("open");
  const checkpoints = new Map<string, ViewModel>();
  for (const entry of transcript) {
    if (entry.checkpoint !== undefined) {
      checkpoints.set(entry.checkpoint,
                      JSON.parse(JSON.stringify(view(store))));
    } else if (entry.dir === "send") {
      store.applySent(entry.msg as RequestMessage);
    } else if (entry.dir === "recv") {
      store.applyReceived(entry.msg as IncomingMessage);
    }
  }
  return checkpoints;
}

const checkpoints = replay();

function vm(name: string): ViewModel {
  const found = checkpoints.get(name);
  if (found === undefined) throw new Error(`no checkpoint ${name}`);
  return found;
}

describe("transcript replay", () => {
  test("covers all recorded checkpoints", () => {
    expect([...checkpoints.keys()]).toEqual(
      ["entry", "breakpoints-set", "first-breakpoint", "toggled",
       "deep-stack", "restarted", "stepped"]);
  });

  test("entry: source pane shows the file, entry line highlighted", () => {
    const m = vm("entry");
    expect(m.status).toBe("suspended (entry) at main at fact.c:8:1");
    expect(m.source?.available).toBe(true);
    expect(m.source?.file).toBe("fact.c");
    const line8 = m.source!.lines[7];
    expect(line8.highlighted).toBe(true);
    expect(line8.text).toBe("int main() {");
    // column markers exist only at resolved statement positions
    const line3 = m.source!.lines[2];
    expect(line3.markers.map((mk) => mk.column)).toEqual([7, 9]);
    expect(m.source!.lines[4].markers.map((mk) => mk.column)).toEqual([3]);
    expect(vmSnapshot(m)).toMatchSnapshot();
  });

  test("breakpoints-set: both markers active and listed", () => {
    const m = vm("breakpoints-set");
    const line3 = m.source!.lines[2];
    const line5 = m.source!.lines[4];
    expect(line3.markers.find((mk) => mk.column === 9)?.breakpoint)
      .toBe("enabled");
    expect(line5.markers.find((mk) => mk.column === 3)?.breakpoint)
      .toBe("enabled");
    expect(m.breakpointList.map((b) => b.label)).toEqual(
      ["fact.c:5:3", "fact.c:3:9"]);
    expect(vmSnapshot(m)).toMatchSnapshot();
  });

  test("first breakpoint: highlight, stack and scope tree", () => {
    const m = vm("first-breakpoint");
    expect(m.status).toBe("suspended (breakpoint) at fact at fact.c:3:9");
    const line3 = m.source!.lines[2];
    expect(line3.highlighted).toBe(true);
    expect(line3.highlightColumn).toBe(9);
    expect(m.stack.map((f) => f.label)).toEqual(
      ["fact at fact.c:3:9", "main at fact.c:9:10"]);
    expect(m.stack[0].selected).toBe(true);
    expect(m.scopes.map((s) => s.name)).toEqual(["Local", "<static>"]);
    const locals = m.scopes[0].variables!;
    expect(locals.map((v) => [v.name, v.value, v.type])).toEqual(
      [["n", "5", "int"], ["result", "1", "int"]]);
    expect(vmSnapshot(m)).toMatchSnapshot();
  });

  test("toggled: disabling one breakpoint never affects the other", () => {
    const m = vm("toggled");
    const line3 = m.source!.lines[2];
    const line5 = m.source!.lines[4];
    expect(line3.markers.find((mk) => mk.column === 9)?.breakpoint)
      .toBe("disabled");
    expect(line5.markers.find((mk) => mk.column === 3)?.breakpoint)
      .toBe("enabled");
    expect(vmSnapshot(m)).toMatchSnapshot();
  });

  test("deep stack: one entry per live activation", () => {
    const m = vm("deep-stack");
    expect(m.stack).toHaveLength(7);
    expect(m.stack[0].label).toBe("fact at fact.c:5:3");
    expect(m.stack.slice(1, 6).every(
      (f) => f.label === "fact at fact.c:4:18")).toBe(true);
    expect(m.stack[6].label).toBe("main at fact.c:9:10");
    const locals = m.scopes[0].variables!;
    expect(locals.map((v) => [v.name, v.value])).toEqual(
      [["n", "0"], ["result", "1"]]);
    expect(vmSnapshot(m)).toMatchSnapshot();
  });

  test("restart frame: highlight back at the function entry", () => {
    const m = vm("restarted");
    expect(m.status).toBe("suspended (step) at fact at fact.c:1:1");
    expect(m.source!.lines[0].highlighted).toBe(true);
    expect(vmSnapshot(m)).toMatchSnapshot();
  });

  test("step: highlight advances to the comparison", () => {
    const m = vm("stepped");
    const line3 = m.source!.lines[2];
    expect(line3.highlighted).toBe(true);
    expect(line3.highlightColumn).toBe(9);
    expect(vmSnapshot(m)).toMatchSnapshot();
  });

  test("replay is deterministic", () => {
    const again = replay();
    expect(again).toEqual(checkpoints);
  });
});

/** Stable projection for snapshots (maps serialize poorly). */
function vmSnapshot(m: ViewModel): unknown {
  return JSON.parse(JSON.stringify(m));
}
