/**
 * Suggestion morph playback: steps through exactly the frames the server
 * returned, one render callback per frame, then settles on the last frame.
 */

import type { WirePoint } from "./strokes.js";

export type FrameRenderer = (frame: WirePoint[], index: number) => void;

export class MorphPlayer {
  private timer: ReturnType<typeof setInterval> | null = null;
  renderedFrames: number[] = [];

  constructor(private render: FrameRenderer, private frameMs = 120) {}

  get playing(): boolean {
    return this.timer !== null;
  }

  /** Render every server frame in order; resolves when the last one is shown. */
  play(frames: WirePoint[][]): Promise<number> {
    this.stop();
    this.renderedFrames = [];
    if (frames.length === 0) return Promise.resolve(0);
    return new Promise((resolve) => {
      let i = 0;
      const step = () => {
        this.render(frames[i], i);
        this.renderedFrames.push(i);
        i += 1;
        if (i >= frames.length) {
          this.stop();
          resolve(this.renderedFrames.length);
        }
      };
      this.timer = setInterval(step, this.frameMs);
      step();
    });
  }

  /** Synchronous playback used by tests and reduced-motion mode. */
  playImmediate(frames: WirePoint[][]): number {
    this.stop();
    this.renderedFrames = [];
    frames.forEach((frame, i) => {
      this.render(frame, i);
      this.renderedFrames.push(i);
    });
    return this.renderedFrames.length;
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
