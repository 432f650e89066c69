import { describe, expect, it } from "vitest";

import { AnnotationDraft } from "../src/draft.js";

const identity = { scale: 1, offsetX: 0, offsetY: 0 };

function draft(): AnnotationDraft {
  return new AnnotationDraft(
    { sequence: "clip", frame: 42, width: 64, height: 48, frameCount: 100 },
    "s01",
  );
}

describe("AnnotationDraft", () => {
  it("is not submittable until type and ellipse exist", () => {
    const d = draft();
    expect(d.valid).toBe(false);
    d.beginDrag({ x: 20, y: 20 });
    d.endDrag({ x: 28, y: 26 }, identity);
    expect(d.valid).toBe(false); // no type yet
    d.setPeaType("blocking");
    expect(d.valid).toBe(true);
  });

  it("rejects sub-pixel ellipses", () => {
    const d = draft();
    d.setPeaType("blocking");
    d.beginDrag({ x: 20, y: 20 });
    d.endDrag({ x: 20.5, y: 26 }, identity);
    expect(d.valid).toBe(false);
  });

  it("gates the temporal flag on the artifact type", () => {
    const d = draft();
    d.setPeaType("blocking");
    expect(d.temporalAllowed).toBe(false);
    d.setTemporal(true);
    expect(d.temporal).toBe(false);
    d.setPeaType("flickering");
    expect(d.temporalAllowed).toBe(true);
    d.setTemporal(true);
    expect(d.temporal).toBe(true);
    // switching back to a spatial type clears the flag
    d.setPeaType("ringing");
    expect(d.temporal).toBe(false);
  });

  it("serializes the paused frame index", () => {
    const d = draft();
    d.setPeaType("blurring");
    d.beginDrag({ x: 30, y: 20 });
    d.endDrag({ x: 40, y: 28 }, identity);
    const wire = d.toWire();
    expect(wire.frame).toBe(42);
    expect(wire).toMatchObject({
      sequence: "clip", cx: 30, cy: 20, rx: 10, ry: 8,
      subject_id: "s01", temporal: false,
    });
  });

  it("never emits centers outside the native frame", () => {
    const d = draft();
    d.setPeaType("blurring");
    d.beginDrag({ x: 63.5, y: 47.5 });
    d.updateDrag({ x: 120, y: 90 }, identity);
    d.endDrag({ x: 120, y: 90 }, identity);
    const wire = d.toWire();
    expect(wire.cx).toBeLessThan(64);
    expect(wire.cy).toBeLessThan(48);
  });
});
