/** Keyboard-first review: map raw key presses to review actions. */

import { ErrorType, Verdict } from "./api.js";
import { OverlayToggles } from "./state.js";

/** Digit hotkeys 1-4, in the same order as the stats panel columns. */
export const TYPE_HOTKEYS: readonly ErrorType[] = ["spawn", "drop", "flip", "shift"];

export type Action =
  | { type: "verdict"; verdict: Verdict }
  | { type: "tag"; errorType: ErrorType }
  | { type: "nav"; delta: number }
  | { type: "toggle"; part: keyof OverlayToggles }
  | { type: "zoom"; factor: number }
  | { type: "reset-view" }
  | { type: "retry" };

const VERDICT_KEYS: Record<string, Verdict> = { t: "tp", f: "fp", u: "unsure" };
const TOGGLE_KEYS: Record<string, keyof OverlayToggles> = {
  b: "proposal",
  l: "labels",
  n: "names",
};

export interface KeyContext {
  /** True when focus is in a text entry; all shortcuts are suppressed. */
  editing: boolean;
}

export function mapKey(key: string, ctx: KeyContext = { editing: false }): Action | null {
  if (ctx.editing) return null;
  const lower = key.length === 1 ? key.toLowerCase() : key;
  if (lower in VERDICT_KEYS) return { type: "verdict", verdict: VERDICT_KEYS[lower] };
  if (lower >= "1" && lower <= "4") {
    return { type: "tag", errorType: TYPE_HOTKEYS[Number(lower) - 1] };
  }
  if (lower in TOGGLE_KEYS) return { type: "toggle", part: TOGGLE_KEYS[lower] };
  switch (lower) {
    case "ArrowRight":
      return { type: "nav", delta: 1 };
    case "ArrowLeft":
      return { type: "nav", delta: -1 };
    case "+":
    case "=":
      return { type: "zoom", factor: 1.25 };
    case "-":
      return { type: "zoom", factor: 0.8 };
    case "0":
      return { type: "reset-view" };
    case "r":
      return { type: "retry" };
    default:
      return null;
  }
}

/** True when the event target is a text-entry element. */
export function isEditingTarget(target: EventTarget | null): boolean {
  if (!target || typeof (target as HTMLElement).tagName !== "string") return false;
  const tag = (target as HTMLElement).tagName;
  return tag === "INPUT" || tag === "TEXTAREA" || tag === "SELECT";
}
