import { describe, expect, it } from "vitest";

import { isEditingTarget, mapKey, TYPE_HOTKEYS } from "../src/keyboard.js";

describe("verdict keys", () => {
  it("maps t/f/u to the three verdicts", () => {
    expect(mapKey("t")).toEqual({ type: "verdict", verdict: "tp" });
    expect(mapKey("f")).toEqual({ type: "verdict", verdict: "fp" });
    expect(mapKey("u")).toEqual({ type: "verdict", verdict: "unsure" });
  });

  it("is case insensitive for letter keys", () => {
    expect(mapKey("T")).toEqual({ type: "verdict", verdict: "tp" });
    expect(mapKey("L")).toEqual({ type: "toggle", part: "labels" });
  });
});

describe("type tag keys", () => {
  it("maps 1-4 to the stats panel column order", () => {
    expect(TYPE_HOTKEYS).toEqual(["spawn", "drop", "flip", "shift"]);
    expect(mapKey("1")).toEqual({ type: "tag", errorType: "spawn" });
    expect(mapKey("2")).toEqual({ type: "tag", errorType: "drop" });
    expect(mapKey("3")).toEqual({ type: "tag", errorType: "flip" });
    expect(mapKey("4")).toEqual({ type: "tag", errorType: "shift" });
    expect(mapKey("5")).toBeNull();
  });
});

describe("navigation and view keys", () => {
  it("maps arrows to rank steps", () => {
    expect(mapKey("ArrowRight")).toEqual({ type: "nav", delta: 1 });
    expect(mapKey("ArrowLeft")).toEqual({ type: "nav", delta: -1 });
  });

  it("maps overlay toggles", () => {
    expect(mapKey("b")).toEqual({ type: "toggle", part: "proposal" });
    expect(mapKey("l")).toEqual({ type: "toggle", part: "labels" });
    expect(mapKey("n")).toEqual({ type: "toggle", part: "names" });
  });

  it("maps zoom keys", () => {
    expect(mapKey("+")).toEqual({ type: "zoom", factor: 1.25 });
    expect(mapKey("=")).toEqual({ type: "zoom", factor: 1.25 });
    expect(mapKey("-")).toEqual({ type: "zoom", factor: 0.8 });
    expect(mapKey("0")).toEqual({ type: "reset-view" });
  });

  it("maps r to retry", () => {
    expect(mapKey("r")).toEqual({ type: "retry" });
  });
});

describe("suppression", () => {
  it("ignores everything while editing text", () => {
    for (const key of ["t", "f", "1", "ArrowRight", "r"]) {
      expect(mapKey(key, { editing: true })).toBeNull();
    }
  });

  it("ignores unmapped keys", () => {
    expect(mapKey("q")).toBeNull();
    expect(mapKey("Escape")).toBeNull();
    expect(mapKey("Enter")).toBeNull();
  });

  it("detects text-entry targets by tag", () => {
    expect(isEditingTarget({ tagName: "INPUT" } as unknown as EventTarget)).toBe(true);
    expect(isEditingTarget({ tagName: "TEXTAREA" } as unknown as EventTarget)).toBe(true);
    expect(isEditingTarget({ tagName: "SELECT" } as unknown as EventTarget)).toBe(true);
    expect(isEditingTarget({ tagName: "CANVAS" } as unknown as EventTarget)).toBe(false);
    expect(isEditingTarget(null)).toBe(false);
  });
});
