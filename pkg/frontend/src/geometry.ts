// Canvas <-> native-pixel coordinate mapping and the center-outward drag
// gesture. Annotations are stored in native frame pixels, so every gesture
// must round-trip through the current zoom without drift.

export interface ViewTransform {
  scale: number; // canvas pixels per native pixel
  offsetX: number; // canvas x of native (0, 0)
  offsetY: number;
}

export interface Point {
  x: number;
  y: number;
}

export interface EllipseParams {
  cx: number;
  cy: number;
  rx: number;
  ry: number;
}

export function canvasToNative(p: Point, view: ViewTransform): Point {
  return {
    x: (p.x - view.offsetX) / view.scale,
    y: (p.y - view.offsetY) / view.scale,
  };
}

export function nativeToCanvas(p: Point, view: ViewTransform): Point {
  return {
    x: p.x * view.scale + view.offsetX,
    y: p.y * view.scale + view.offsetY,
  };
}

/** Center-outward drag: the press point is the center, the current point
 * sets the semi-axes. Both points arrive in canvas coordinates. */
export function dragToEllipse(
  start: Point,
  current: Point,
  view: ViewTransform,
): EllipseParams {
  const c = canvasToNative(start, view);
  const edge = canvasToNative(current, view);
  return {
    cx: c.x,
    cy: c.y,
    rx: Math.abs(edge.x - c.x),
    ry: Math.abs(edge.y - c.y),
  };
}

/** Keep the center inside the frame; semi-axes may extend past the border
 * (the server clips the rasterized mask). */
export function clampCenter(
  e: EllipseParams,
  width: number,
  height: number,
): EllipseParams {
  const clamp = (v: number, hi: number) => Math.min(Math.max(v, 0), hi);
  return {
    cx: clamp(e.cx, width - 1),
    cy: clamp(e.cy, height - 1),
    rx: e.rx,
    ry: e.ry,
  };
}

export function ellipseLargeEnough(e: EllipseParams): boolean {
  return e.rx >= 1 && e.ry >= 1;
}
