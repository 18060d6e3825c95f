// Client-side labelling and review state.
//
// The server is the source of truth: state is rebuilt from its responses
// (reloading the page reproduces exactly the server's annotation and flag
// state). The only client-only data is the queue of points that have not
// been acknowledged yet, which survives network failures and is retried.

import type { ApiClient } from "./api.js";
import type { Annotation, AnnotationsResponse, Mode, OutlierFlag, OutliersResponse, VideoInfo } from "./types.js";

export interface PlacedPoint extends Annotation {
  submitted: boolean;
}

export class LabellingState {
  readonly video: VideoInfo;
  readonly mode: Mode;
  readonly promptOrder: string[];
  currentFrame = 0;
  points: PlacedPoint[] = [];

  constructor(video: VideoInfo, session: AnnotationsResponse) {
    this.video = video;
    this.mode = session.mode;
    this.promptOrder = [...session.prompt_order];
    this.reconcile(session);
  }

  /** Adopt the server's annotation list, keeping unacknowledged local points. */
  reconcile(session: AnnotationsResponse): void {
    const queue = this.points.filter(
      (p) => !p.submitted && !session.annotations.some((a) => a.keypoint === p.keypoint),
    );
    this.points = [
      ...session.annotations.map((a) => ({ ...a, submitted: true })),
      ...queue,
    ];
  }

  nextKeypoint(): string | null {
    const done = new Set(this.points.map((p) => p.keypoint));
    return this.promptOrder.find((k) => !done.has(k)) ?? null;
  }

  get complete(): boolean {
    return this.nextKeypoint() === null;
  }

  /**
   * Place the currently prompted keypoint at a click position on the
   * current frame. Rejects out-of-bounds clicks and returns null (nothing
   * is queued in that case).
   */
  placeAt(x: number, y: number): PlacedPoint | null {
    const keypoint = this.nextKeypoint();
    if (keypoint === null) return null;
    if (x < 0 || x > this.video.width || y < 0 || y > this.video.height) return null;
    const point: PlacedPoint = { keypoint, frame: this.currentFrame, x, y, submitted: false };
    this.points.push(point);
    return point;
  }

  /** "Not visible here": jump to a later frame where the point is clearer. */
  skipToFrame(frame: number): boolean {
    if (frame <= this.currentFrame || frame >= this.video.n_frames) return false;
    this.currentFrame = frame;
    return true;
  }

  stepFrame(delta: number): void {
    const next = this.currentFrame + delta;
    this.currentFrame = Math.min(Math.max(next, 0), this.video.n_frames - 1);
  }

  /** Undo removes only the most recent *unsubmitted* point. */
  undo(): PlacedPoint | null {
    for (let i = this.points.length - 1; i >= 0; i--) {
      const p = this.points[i]!;
      if (!p.submitted) {
        this.points.splice(i, 1);
        return p;
      }
    }
    return null;
  }

  unsubmitted(): PlacedPoint[] {
    return this.points.filter((p) => !p.submitted);
  }

  markSubmitted(keypoint: string): void {
    for (const p of this.points) {
      if (p.keypoint === keypoint) p.submitted = true;
    }
  }
}

/**
 * Push queued points to the server. Points that fail to send stay queued
 * for the next flush; the returned counts let the UI show sync status.
 */
export async function flushPoints(
  state: LabellingState,
  client: ApiClient,
): Promise<{ sent: number; failed: number }> {
  let sent = 0;
  let failed = 0;
  for (const point of state.unsubmitted()) {
    try {
      await client.postAnnotation(state.video.video_id, {
        keypoint: point.keypoint,
        frame: point.frame,
        x: point.x,
        y: point.y,
      });
      state.markSubmitted(point.keypoint);
      sent++;
    } catch {
      failed++;
    }
  }
  return { sent, failed };
}

export class ReviewState {
  flags: OutlierFlag[] = [];
  round = 0;
  cursor = 0;

  constructor(response: OutliersResponse) {
    this.reload(response);
  }

  /** Adopt the server's flag list (used on load and after every retrack). */
  reload(response: OutliersResponse): void {
    this.flags = [...response.flags];
    this.round = response.round;
    this.cursor = 0;
    this.advancePastCorrected();
  }

  private advancePastCorrected(): void {
    while (this.cursor < this.flags.length && this.flags[this.cursor]!.corrected) {
      this.cursor++;
    }
  }

  current(): OutlierFlag | null {
    return this.cursor < this.flags.length ? this.flags[this.cursor]! : null;
  }

  get remaining(): number {
    return this.flags.filter((f) => !f.corrected).length;
  }

  get done(): boolean {
    return this.remaining === 0;
  }

  markCorrected(index: number): void {
    const flag = this.flags.find((f) => f.index === index);
    if (flag) flag.corrected = true;
    this.advancePastCorrected();
  }
}
