/** Canvas overlay: view transform math and a declarative draw plan.
 *
 * Rendering is split in two so the geometry is testable without a canvas:
 * `buildDrawPlan` turns the scene into primitive ops, `execute` replays
 * them onto anything that looks like a 2D context.
 */

import { ImageLabel, Proposal, WireBox } from "./api.js";
import { OverlayToggles, ViewState } from "./state.js";

export const PROPOSAL_COLOR = "#ff3b30";
export const LABEL_COLOR = "#30d158";
export const TEXT_COLOR = "#ffffff";

export interface Transform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Largest scale that fits the image inside the canvas. */
export function fitScale(imgW: number, imgH: number, canvasW: number, canvasH: number): number {
  return Math.min(canvasW / imgW, canvasH / imgH);
}

/** Fit, center, then apply the user's zoom (about the canvas center) and pan. */
export function makeTransform(
  imgW: number,
  imgH: number,
  canvasW: number,
  canvasH: number,
  view: ViewState,
): Transform {
  const scale = fitScale(imgW, imgH, canvasW, canvasH) * view.zoom;
  const offsetX = (canvasW - imgW * scale) / 2 + view.panX;
  const offsetY = (canvasH - imgH * scale) / 2 + view.panY;
  return { scale, offsetX, offsetY };
}

/** [cx, cy, w, h] in image pixels to a top-left rect in canvas pixels. */
export function boxToRect(box: WireBox, t: Transform): Rect {
  const [cx, cy, w, h] = box;
  return {
    x: (cx - w / 2) * t.scale + t.offsetX,
    y: (cy - h / 2) * t.scale + t.offsetY,
    w: w * t.scale,
    h: h * t.scale,
  };
}

export type DrawOp =
  | { kind: "image"; x: number; y: number; w: number; h: number }
  | { kind: "rect"; rect: Rect; color: string; width: number; dash: number[] }
  | { kind: "text"; text: string; x: number; y: number; color: string };

export interface Scene {
  imageW: number;
  imageH: number;
  canvasW: number;
  canvasH: number;
  view: ViewState;
  proposal: Proposal | null;
  labels: ImageLabel[];
  toggles: OverlayToggles;
  classNames: string[];
}

export function className(classNames: string[], classId: number): string {
  return classNames[classId - 1] ?? `class ${classId}`;
}

export function buildDrawPlan(scene: Scene): DrawOp[] {
  const t = makeTransform(scene.imageW, scene.imageH, scene.canvasW, scene.canvasH, scene.view);
  const ops: DrawOp[] = [
    {
      kind: "image",
      x: t.offsetX,
      y: t.offsetY,
      w: scene.imageW * t.scale,
      h: scene.imageH * t.scale,
    },
  ];
  if (scene.toggles.labels) {
    for (const label of scene.labels) {
      const rect = boxToRect(label.box, t);
      ops.push({ kind: "rect", rect, color: LABEL_COLOR, width: 2, dash: [] });
      if (scene.toggles.names) {
        ops.push({
          kind: "text",
          text: label.class_name,
          x: rect.x + 2,
          y: rect.y - 4,
          color: LABEL_COLOR,
        });
      }
    }
  }
  if (scene.toggles.proposal && scene.proposal) {
    const rect = boxToRect(scene.proposal.box, t);
    ops.push({ kind: "rect", rect, color: PROPOSAL_COLOR, width: 3, dash: [6, 4] });
    if (scene.toggles.names) {
      ops.push({
        kind: "text",
        text: className(scene.classNames, scene.proposal.predicted_class),
        x: rect.x + 2,
        y: rect.y + rect.h + 12,
        color: PROPOSAL_COLOR,
      });
    }
  }
  return ops;
}

/** The subset of CanvasRenderingContext2D the plan needs. */
export interface DrawTarget {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  setLineDash(dash: number[]): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  drawImage(image: CanvasImageSource, x: number, y: number, w: number, h: number): void;
}

export function execute(ops: DrawOp[], ctx: DrawTarget, image: CanvasImageSource | null): void {
  for (const op of ops) {
    switch (op.kind) {
      case "image":
        if (image) ctx.drawImage(image, op.x, op.y, op.w, op.h);
        break;
      case "rect":
        ctx.strokeStyle = op.color;
        ctx.lineWidth = op.width;
        ctx.setLineDash(op.dash);
        ctx.strokeRect(op.rect.x, op.rect.y, op.rect.w, op.rect.h);
        break;
      case "text":
        ctx.fillStyle = op.color;
        ctx.font = "12px system-ui, sans-serif";
        ctx.fillText(op.text, op.x, op.y);
        break;
    }
  }
}
