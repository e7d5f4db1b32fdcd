/** DOM bootstrap: wires the API client, state machine, canvas and keyboard.
 *
 * Everything interesting lives in the imported modules; this file only
 * shuttles between them and the document.
 */

import { ApiClient, ApiError, ErrorType, ImageLabels, Verdict } from "./api.js";
import { isEditingTarget, mapKey, TYPE_HOTKEYS } from "./keyboard.js";
import { buildDrawPlan, className, execute } from "./overlay.js";
import { ReviewController } from "./state.js";
import { formatPrecision, progressText, typeCounts } from "./stats.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const api = new ApiClient("");

interface LoadedImage {
  element: HTMLImageElement | null; // null while loading or after a failure
  failed: boolean;
}

const imageCache = new Map<number, LoadedImage>();
const labelCache = new Map<number, ImageLabels>();

function loadImage(imageId: number, onSettled: () => void): LoadedImage {
  const cached = imageCache.get(imageId);
  if (cached) return cached;
  const entry: LoadedImage = { element: null, failed: false };
  imageCache.set(imageId, entry);
  const img = new Image();
  img.onload = () => {
    entry.element = img;
    onSettled();
  };
  img.onerror = () => {
    entry.failed = true;
    onSettled();
  };
  img.src = api.imageUrl(imageId);
  return entry;
}

async function loadLabels(imageId: number): Promise<ImageLabels> {
  const cached = labelCache.get(imageId);
  if (cached) return cached;
  const labels = await api.labels(imageId);
  labelCache.set(imageId, labels);
  return labels;
}

function verdictLabel(verdict: Verdict): string {
  return { tp: "error confirmed", fp: "label fine", unsure: "unsure" }[verdict];
}

class App {
  private canvas = el<HTMLCanvasElement>("viewer");
  private dragging: { x: number; y: number } | null = null;

  constructor(private readonly ctrl: ReviewController) {}

  start(): void {
    this.buildTypeChips();
    this.wireButtons();
    this.wireCanvas();
    document.addEventListener("keydown", (ev) => this.onKey(ev));
    window.addEventListener("resize", () => this.render());
    void this.render();
  }

  private buildTypeChips(): void {
    const host = el<HTMLDivElement>("type-chips");
    host.innerHTML = "";
    TYPE_HOTKEYS.forEach((type, i) => {
      const btn = document.createElement("button");
      btn.dataset.type = type;
      btn.textContent = `${i + 1} ${type}`;
      btn.addEventListener("click", () => {
        this.ctrl.toggleType(type);
        void this.render();
      });
      host.appendChild(btn);
    });
  }

  private wireButtons(): void {
    el<HTMLButtonElement>("btn-tp").addEventListener("click", () => void this.submit("tp"));
    el<HTMLButtonElement>("btn-fp").addEventListener("click", () => void this.submit("fp"));
    el<HTMLButtonElement>("btn-unsure").addEventListener("click", () => void this.submit("unsure"));
    el<HTMLButtonElement>("btn-prev").addEventListener("click", () => {
      this.ctrl.prev();
      void this.render();
    });
    el<HTMLButtonElement>("btn-next").addEventListener("click", () => {
      this.ctrl.next();
      void this.render();
    });
    el<HTMLButtonElement>("btn-retry").addEventListener("click", () => void this.retry());
    el<HTMLButtonElement>("btn-image-retry").addEventListener("click", () => {
      const prop = this.ctrl.current();
      if (prop) {
        imageCache.delete(prop.image_id);
        void this.render();
      }
    });
  }

  private wireCanvas(): void {
    this.canvas.addEventListener("mousedown", (ev) => {
      this.dragging = { x: ev.clientX, y: ev.clientY };
    });
    window.addEventListener("mouseup", () => {
      this.dragging = null;
    });
    window.addEventListener("mousemove", (ev) => {
      if (!this.dragging) return;
      this.ctrl.panBy(ev.clientX - this.dragging.x, ev.clientY - this.dragging.y);
      this.dragging = { x: ev.clientX, y: ev.clientY };
      void this.render();
    });
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.ctrl.zoomBy(ev.deltaY < 0 ? 1.1 : 0.9);
      void this.render();
    });
  }

  private onKey(ev: KeyboardEvent): void {
    const action = mapKey(ev.key, { editing: isEditingTarget(ev.target) });
    if (!action) return;
    ev.preventDefault();
    switch (action.type) {
      case "verdict":
        void this.submit(action.verdict);
        return;
      case "tag":
        this.ctrl.toggleType(action.errorType);
        break;
      case "nav":
        this.ctrl.goTo(this.ctrl.currentRank + action.delta);
        break;
      case "toggle":
        this.ctrl.toggleOverlay(action.part);
        break;
      case "zoom":
        this.ctrl.zoomBy(action.factor);
        break;
      case "reset-view":
        this.ctrl.resetView();
        break;
      case "retry":
        void this.retry();
        return;
    }
    void this.render();
  }

  private async submit(verdict: Verdict): Promise<void> {
    const result = await this.ctrl.submit(verdict);
    if (!result.ok && !result.queued) this.flash(result.reason);
    await this.render();
  }

  private async retry(): Promise<void> {
    await this.ctrl.retry();
    await this.render();
  }

  private flash(message: string): void {
    const node = el<HTMLDivElement>("flash");
    node.textContent = message;
    node.classList.add("visible");
    setTimeout(() => node.classList.remove("visible"), 2500);
  }

  private async render(): Promise<void> {
    const ctrl = this.ctrl;
    const prop = ctrl.current();

    el<HTMLSpanElement>("rank-label").textContent = `${ctrl.currentRank} / ${ctrl.k}`;
    el<HTMLSpanElement>("method-label").textContent = ctrl.session.method ?? "?";
    el<HTMLSpanElement>("progress").textContent = progressText(ctrl.stats, ctrl.k);
    el<HTMLSpanElement>("precision").textContent = formatPrecision(ctrl.stats);

    const countsHost = el<HTMLDivElement>("type-counts");
    countsHost.innerHTML = "";
    for (const { type, count } of typeCounts(ctrl.stats)) {
      const cell = document.createElement("div");
      cell.className = "count-cell";
      cell.innerHTML = `<span class="count-name">${type}</span><span class="count-value">${count}</span>`;
      countsHost.appendChild(cell);
    }

    el<HTMLDivElement>("retry-banner").classList.toggle("visible", ctrl.queuedSubmission() !== null);

    for (const btn of el<HTMLDivElement>("type-chips").querySelectorAll("button")) {
      const type = btn.dataset.type as ErrorType;
      btn.classList.toggle("selected", ctrl.pendingTypes.has(type));
    }

    const saved = ctrl.currentVerdict();
    el<HTMLSpanElement>("verdict-status").textContent = saved
      ? `saved: ${verdictLabel(saved.verdict)}${saved.error_types.length ? ` (${saved.error_types.join(", ")})` : ""}`
      : "not reviewed yet";

    if (!prop) {
      el<HTMLDivElement>("components").textContent = "no proposal at this rank";
      return;
    }

    el<HTMLSpanElement>("key-value").textContent = prop.key.toFixed(4);
    const comps = Object.entries(prop.components);
    el<HTMLDivElement>("components").innerHTML = comps.length
      ? comps
          .map(([name, value]) => `<div><span>${name}</span><span>${value.toFixed(4)}</span></div>`)
          .join("")
      : "<div><span>no components</span><span></span></div>";

    let labels: ImageLabels | null = null;
    try {
      labels = await loadLabels(prop.image_id);
    } catch (err) {
      this.flash(err instanceof ApiError ? err.message : String(err));
    }

    const predicted = className(ctrl.session.class_names, prop.predicted_class);
    let labeled = "(no label at this box)";
    if (labels && prop.label_ref !== null) {
      const hit = labels.labels.find((l) => l.id === prop.label_ref);
      if (hit) labeled = hit.class_name;
    }
    el<HTMLSpanElement>("class-line").textContent = `predicted ${predicted} vs labeled ${labeled}`;

    this.drawScene(labels);
  }

  private drawScene(labels: ImageLabels | null): void {
    const prop = this.ctrl.current();
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !prop) return;

    const holder = this.canvas.parentElement;
    if (holder) {
      this.canvas.width = holder.clientWidth;
      this.canvas.height = holder.clientHeight;
    }
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);

    const image = this.ctrl.session.has_images
      ? loadImage(prop.image_id, () => void this.render())
      : null;
    const failed = image?.failed ?? false;
    el<HTMLDivElement>("image-status").classList.toggle("visible", failed);

    const imageW = labels?.width ?? this.canvas.width;
    const imageH = labels?.height ?? this.canvas.height;
    const ops = buildDrawPlan({
      imageW,
      imageH,
      canvasW: this.canvas.width,
      canvasH: this.canvas.height,
      view: this.ctrl.view,
      proposal: prop,
      labels: labels?.labels ?? [],
      toggles: this.ctrl.overlay,
      classNames: this.ctrl.session.class_names,
    });
    if (failed || !image?.element) {
      // placeholder backdrop; boxes still render so review can continue
      ctx.fillStyle = "#2c2c2e";
      const frame = ops[0];
      if (frame.kind === "image") ctx.fillRect(frame.x, frame.y, frame.w, frame.h);
    }
    execute(ops, ctx, image?.element ?? null);
  }
}

async function boot(): Promise<void> {
  const status = el<HTMLDivElement>("boot-status");
  try {
    const ctrl = await ReviewController.load(api);
    status.classList.remove("visible");
    new App(ctrl).start();
  } catch (err) {
    status.textContent = `failed to load session: ${err instanceof Error ? err.message : err}`;
    status.classList.add("visible");
  }
}

void boot();
