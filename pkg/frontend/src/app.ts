// DOM wiring for the annotator: sequence picker, playback controls, the
// drawing canvas with a committed-annotation overlay, and the submit form.
// Rendering goes through OverlayRenderer so logic stays testable without a
// real 2D canvas.

import {
  ApiClient,
  ApiError,
  PEA_TYPES,
  type PeaTypeName,
  type SequenceMeta,
  type StoredAnnotation,
} from "./api.js";
import { AnnotationDraft } from "./draft.js";
import {
  nativeToCanvas,
  type EllipseParams,
  type Point,
  type ViewTransform,
} from "./geometry.js";
import { PlaybackController } from "./player.js";

export interface OverlayRenderer {
  drawFrame(png: ArrayBuffer | null, width: number, height: number): void;
  drawCommitted(annotations: StoredAnnotation[], view: ViewTransform): void;
  drawDraft(ellipse: EllipseParams | null, view: ViewTransform): void;
}

export class CanvasRenderer implements OverlayRenderer {
  constructor(private readonly canvas: HTMLCanvasElement) {}

  private ctx(): CanvasRenderingContext2D | null {
    return this.canvas.getContext ? this.canvas.getContext("2d") : null;
  }

  drawFrame(png: ArrayBuffer | null, width: number, height: number): void {
    const ctx = this.ctx();
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!png) return;
    const blob = new Blob([png], { type: "image/png" });
    const url = URL.createObjectURL(blob);
    const img = new Image();
    img.onload = () => {
      ctx.drawImage(img, 0, 0, this.canvas.width, this.canvas.height);
      URL.revokeObjectURL(url);
    };
    img.src = url;
  }

  private stroke(e: EllipseParams, view: ViewTransform, color: string): void {
    const ctx = this.ctx();
    if (!ctx) return;
    const c = nativeToCanvas({ x: e.cx, y: e.cy }, view);
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.ellipse(c.x, c.y, e.rx * view.scale, e.ry * view.scale, 0, 0, 2 * Math.PI);
    ctx.stroke();
  }

  drawCommitted(annotations: StoredAnnotation[], view: ViewTransform): void {
    for (const a of annotations) {
      this.stroke({ cx: a.cx, cy: a.cy, rx: a.rx, ry: a.ry }, view, "#27c24c");
    }
  }

  drawDraft(ellipse: EllipseParams | null, view: ViewTransform): void {
    if (ellipse) this.stroke(ellipse, view, "#ff5533");
  }
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

export interface AppOptions {
  subjectId: string;
  zoom?: number;
  renderer?: OverlayRenderer;
}

export class AnnotatorApp {
  readonly canvas: HTMLCanvasElement;
  readonly sequenceSelect: HTMLSelectElement;
  readonly typeSelect: HTMLSelectElement;
  readonly temporalToggle: HTMLInputElement;
  readonly submitButton: HTMLButtonElement;
  readonly playButton: HTMLButtonElement;
  readonly stepButton: HTMLButtonElement;
  readonly status: HTMLElement;
  readonly errorBox: HTMLElement;
  readonly progressBox: HTMLElement;

  player: PlaybackController | null = null;
  draft: AnnotationDraft | null = null;
  committed: StoredAnnotation[] = [];
  meta: SequenceMeta | null = null;
  readonly zoom: number;
  private renderer: OverlayRenderer | null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly opts: AppOptions,
  ) {
    const doc = root.ownerDocument;
    this.zoom = opts.zoom ?? 1;
    this.sequenceSelect = el(doc, "select", { id: "sequence" });
    this.playButton = el(doc, "button", { id: "play" }, "play");
    this.stepButton = el(doc, "button", { id: "step" }, "step");
    this.canvas = el(doc, "canvas", { id: "frame-canvas" });
    this.typeSelect = el(doc, "select", { id: "pea-type" });
    this.typeSelect.appendChild(el(doc, "option", { value: "" }, "artifact type"));
    for (const t of PEA_TYPES) {
      this.typeSelect.appendChild(el(doc, "option", { value: t }, t));
    }
    this.temporalToggle = el(doc, "input", {
      type: "checkbox",
      id: "temporal",
      disabled: "true",
    }) as HTMLInputElement;
    this.submitButton = el(doc, "button", { id: "submit", disabled: "true" }, "submit");
    this.status = el(doc, "div", { id: "status" });
    this.errorBox = el(doc, "div", { id: "error", role: "alert" });
    this.progressBox = el(doc, "div", { id: "progress" });
    for (const node of [
      this.sequenceSelect, this.playButton, this.stepButton, this.canvas,
      this.typeSelect, this.temporalToggle, this.submitButton, this.status,
      this.errorBox, this.progressBox,
    ]) {
      root.appendChild(node);
    }
    this.renderer = opts.renderer ?? new CanvasRenderer(this.canvas);
    this.bindEvents();
  }

  get view(): ViewTransform {
    return { scale: this.zoom, offsetX: 0, offsetY: 0 };
  }

  private bindEvents(): void {
    this.sequenceSelect.addEventListener("change", () => {
      void this.selectSequence(this.sequenceSelect.value);
    });
    this.playButton.addEventListener("click", () => this.togglePlay());
    this.stepButton.addEventListener("click", () => this.player?.step());
    this.canvas.addEventListener("mousedown", (e) => this.pointerDown(this.eventPoint(e)));
    this.canvas.addEventListener("mousemove", (e) => this.pointerMove(this.eventPoint(e)));
    this.canvas.addEventListener("mouseup", (e) => this.pointerUp(this.eventPoint(e)));
    this.typeSelect.addEventListener("change", () => {
      if (this.draft && this.typeSelect.value) {
        this.draft.setPeaType(this.typeSelect.value as PeaTypeName);
      }
      this.syncControls();
    });
    this.temporalToggle.addEventListener("change", () => {
      this.draft?.setTemporal(this.temporalToggle.checked);
      this.syncControls();
    });
    this.submitButton.addEventListener("click", () => void this.submit());
  }

  private eventPoint(e: MouseEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return { x: e.clientX - rect.left, y: e.clientY - rect.top };
  }

  async init(): Promise<void> {
    const sequences = await this.client.listSequences();
    for (const meta of sequences) {
      this.sequenceSelect.appendChild(
        el(this.root.ownerDocument, "option", { value: meta.name }, meta.name),
      );
    }
    if (sequences.length) {
      this.sequenceSelect.value = sequences[0].name;
      await this.selectSequence(sequences[0].name);
    }
  }

  async selectSequence(name: string): Promise<void> {
    const sequences = await this.client.listSequences();
    const meta = sequences.find((s) => s.name === name);
    if (!meta) return;
    this.meta = meta;
    this.canvas.width = meta.width * this.zoom;
    this.canvas.height = meta.height * this.zoom;
    this.player?.pause();
    this.player = new PlaybackController(meta.frame_count, meta.frame_rate);
    this.player.onFrame((frame) => void this.showFrame(frame));
    this.committed = await this.client.getAnnotations(name);
    this.draft = null;
    await this.showFrame(0);
    this.syncControls();
  }

  private async showFrame(frame: number): Promise<void> {
    if (!this.meta) return;
    this.status.textContent = `${this.meta.name} frame ${frame}/${this.meta.frame_count - 1}`;
    let png: ArrayBuffer | null = null;
    try {
      png = await this.client.fetchFramePng(this.meta.name, frame);
      this.errorBox.textContent = "";
    } catch (err) {
      this.errorBox.textContent = `frame fetch failed: ${String(err)}; retry with step`;
    }
    this.renderer?.drawFrame(png, this.canvas.width, this.canvas.height);
    this.redrawOverlay();
  }

  private redrawOverlay(): void {
    if (!this.player) return;
    const onFrame = this.committed.filter((a) => a.frame === this.player!.frame);
    this.renderer?.drawCommitted(onFrame, this.view);
    this.renderer?.drawDraft(this.draft?.ellipse ?? null, this.view);
  }

  togglePlay(): void {
    if (!this.player) return;
    if (this.player.playing) {
      this.player.pause();
      this.playButton.textContent = "play";
    } else {
      this.draft = null;
      this.player.play();
      this.playButton.textContent = "pause";
    }
    this.syncControls();
  }

  /** Drawing requires a paused frame: pausing freezes the index used below. */
  pointerDown(p: Point): void {
    if (!this.meta || !this.player || this.player.playing) return;
    this.draft = new AnnotationDraft(
      {
        sequence: this.meta.name,
        frame: this.player.frame,
        width: this.meta.width,
        height: this.meta.height,
        frameCount: this.meta.frame_count,
      },
      this.opts.subjectId,
    );
    if (this.typeSelect.value) {
      this.draft.setPeaType(this.typeSelect.value as PeaTypeName);
    }
    this.draft.beginDrag(p);
  }

  pointerMove(p: Point): void {
    if (this.draft?.dragging) {
      this.draft.updateDrag(p, this.view);
      this.redrawOverlay();
    }
  }

  pointerUp(p: Point): void {
    if (this.draft?.dragging) {
      this.draft.endDrag(p, this.view);
      if (!this.draft.ellipse || this.draft.ellipse.rx < 1 || this.draft.ellipse.ry < 1) {
        this.errorBox.textContent = "drag further: the circled region is sub-pixel";
      }
      this.syncControls();
      this.redrawOverlay();
    }
  }

  syncControls(): void {
    const temporalOk = this.draft?.temporalAllowed ?? false;
    if (temporalOk) {
      this.temporalToggle.removeAttribute("disabled");
    } else {
      this.temporalToggle.setAttribute("disabled", "true");
      this.temporalToggle.checked = false;
    }
    if (this.draft?.valid) {
      this.submitButton.removeAttribute("disabled");
    } else {
      this.submitButton.setAttribute("disabled", "true");
    }
  }

  async submit(): Promise<StoredAnnotation | null> {
    if (!this.draft?.valid) return null;
    const wire = this.draft.toWire();
    try {
      const stored = await this.client.postAnnotation(wire);
      this.committed.push(stored);
      this.draft = null;
      this.errorBox.textContent = "";
      this.syncControls();
      this.redrawOverlay();
      await this.refreshProgress();
      return stored;
    } catch (err) {
      // keep the draft so the subject can fix the field or retry
      if (err instanceof ApiError) {
        const field = err.body.field ? ` [${err.body.field}]` : "";
        this.errorBox.textContent = `rejected${field}: ${err.body.error}`;
      } else {
        this.errorBox.textContent = `submit failed, draft kept: ${String(err)}`;
      }
      this.syncControls();
      return null;
    }
  }

  async refreshProgress(): Promise<void> {
    try {
      const progress = await this.client.getProgress();
      this.progressBox.textContent = JSON.stringify(progress.subjects);
    } catch {
      // progress display is best-effort
    }
  }
}

export function mount(root: HTMLElement, baseUrl: string, opts: AppOptions): AnnotatorApp {
  return new AnnotatorApp(root, new ApiClient(baseUrl), opts);
}
