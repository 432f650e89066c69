// Frame-stepping playback. Annotation happens on paused frames, so the
// controller reports the exact frame index that is frozen on screen.

export type FrameListener = (frame: number) => void;

export interface Scheduler {
  setInterval(fn: () => void, ms: number): number;
  clearInterval(id: number): void;
}

const realScheduler: Scheduler = {
  setInterval: (fn, ms) => setInterval(fn, ms) as unknown as number,
  clearInterval: (id) => clearInterval(id),
};

export class PlaybackController {
  private frame_ = 0;
  private timer: number | null = null;
  private listeners: FrameListener[] = [];

  constructor(
    public readonly frameCount: number,
    public readonly frameRate: number,
    private readonly scheduler: Scheduler = realScheduler,
  ) {
    if (frameCount < 1) throw new Error("empty sequence");
  }

  get frame(): number {
    return this.frame_;
  }

  get playing(): boolean {
    return this.timer !== null;
  }

  onFrame(listener: FrameListener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.frame_);
  }

  seek(frame: number): void {
    this.frame_ = Math.min(Math.max(frame, 0), this.frameCount - 1);
    this.emit();
  }

  /** Advance one frame, clamping at the last one (playback stops there). */
  step(delta = 1): void {
    const next = this.frame_ + delta;
    if (next >= this.frameCount) {
      this.pause();
    }
    this.seek(next);
  }

  play(): void {
    if (this.timer !== null) return;
    const period = 1000 / this.frameRate;
    this.timer = this.scheduler.setInterval(() => this.step(), period);
  }

  /** Freeze playback; the current frame is the one annotations attach to. */
  pause(): number {
    if (this.timer !== null) {
      this.scheduler.clearInterval(this.timer);
      this.timer = null;
    }
    return this.frame_;
  }
}
