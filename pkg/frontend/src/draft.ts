// In-progress annotation state: one ellipse being drawn on a paused frame,
// plus the artifact type and temporal flag. Submit stays disabled until the
// draft is complete and geometrically valid.

import type { AnnotationWire, PeaTypeName } from "./api.js";
import { TEMPORAL_TYPES } from "./api.js";
import type { EllipseParams, Point, ViewTransform } from "./geometry.js";
import { clampCenter, dragToEllipse, ellipseLargeEnough } from "./geometry.js";

export interface FrameContext {
  sequence: string;
  frame: number;
  width: number;
  height: number;
  frameCount: number;
}

export class AnnotationDraft {
  ellipse: EllipseParams | null = null;
  peaType: PeaTypeName | null = null;
  temporal = false;
  private dragStart: Point | null = null;

  constructor(
    public readonly context: FrameContext,
    public readonly subjectId: string,
  ) {}

  beginDrag(canvasPoint: Point): void {
    this.dragStart = canvasPoint;
    this.ellipse = null;
  }

  updateDrag(canvasPoint: Point, view: ViewTransform): void {
    if (!this.dragStart) return;
    const raw = dragToEllipse(this.dragStart, canvasPoint, view);
    this.ellipse = clampCenter(raw, this.context.width, this.context.height);
  }

  endDrag(canvasPoint: Point, view: ViewTransform): void {
    this.updateDrag(canvasPoint, view);
    this.dragStart = null;
  }

  get dragging(): boolean {
    return this.dragStart !== null;
  }

  setPeaType(type: PeaTypeName): void {
    this.peaType = type;
    if (!TEMPORAL_TYPES.includes(type)) {
      this.temporal = false;
    }
  }

  get temporalAllowed(): boolean {
    return this.peaType !== null && TEMPORAL_TYPES.includes(this.peaType);
  }

  setTemporal(flag: boolean): void {
    this.temporal = flag && this.temporalAllowed;
  }

  /** Submit gate: artifact type chosen and the ellipse has rx, ry >= 1. */
  get valid(): boolean {
    return (
      this.peaType !== null &&
      this.ellipse !== null &&
      ellipseLargeEnough(this.ellipse)
    );
  }

  toWire(): AnnotationWire {
    if (!this.valid || !this.ellipse || !this.peaType) {
      throw new Error("draft is not submittable");
    }
    return {
      sequence: this.context.sequence,
      frame: this.context.frame,
      pea_type: this.peaType,
      cx: this.ellipse.cx,
      cy: this.ellipse.cy,
      rx: this.ellipse.rx,
      ry: this.ellipse.ry,
      subject_id: this.subjectId,
      temporal: this.temporal,
    };
  }
}
