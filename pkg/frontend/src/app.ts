// Browser entry point: wires the API client, labelling state and canvas
// into the page. Layout lives in index.html; this file only manipulates
// the handful of elements it looks up at startup.

import { ApiClient, ApiError } from "./api.js";
import { drawFlag, drawPoints } from "./canvas.js";
import { LabellingState, ReviewState, flushPoints } from "./state.js";
import type { Mode, VideoInfo } from "./types.js";

const SERVER = (window as { GMAKIT_SERVER?: string }).GMAKIT_SERVER ?? "http://127.0.0.1:8000";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  client = new ApiClient(SERVER);
  videos: VideoInfo[] = [];
  labelling: LabellingState | null = null;
  review: ReviewState | null = null;

  canvas = el<HTMLCanvasElement>("frame");
  videoSelect = el<HTMLSelectElement>("videos");
  modeSelect = el<HTMLSelectElement>("mode");
  prompt = el<HTMLDivElement>("prompt");
  status = el<HTMLDivElement>("status");
  flagBox = el<HTMLDivElement>("flag-box");

  async start(): Promise<void> {
    this.videos = await this.client.listVideos();
    this.videoSelect.innerHTML = this.videos
      .map((v) => `<option value="${v.video_id}">${v.video_id} (${v.n_frames} frames)</option>`)
      .join("");
    this.videoSelect.onchange = () => void this.openVideo();
    this.modeSelect.onchange = () => void this.openVideo();

    this.canvas.onclick = (ev) => void this.onCanvasClick(ev);
    el<HTMLButtonElement>("skip").onclick = () => this.onSkip();
    el<HTMLButtonElement>("undo").onclick = () => this.onUndo();
    el<HTMLButtonElement>("finish").onclick = () => void this.onFinish();
    el<HTMLButtonElement>("retrack").onclick = () => void this.onRetrack();
    document.addEventListener("keydown", (ev) => this.onKey(ev));

    if (this.videos.length) await this.openVideo();
  }

  get video(): VideoInfo {
    const id = this.videoSelect.value || this.videos[0]!.video_id;
    return this.videos.find((v) => v.video_id === id) ?? this.videos[0]!;
  }

  async openVideo(): Promise<void> {
    const mode = this.modeSelect.value as Mode;
    const session = await this.client.getAnnotations(this.video.video_id, mode);
    this.labelling = new LabellingState(this.video, session);
    this.review = null;
    try {
      this.review = new ReviewState(await this.client.getOutliers(this.video.video_id));
    } catch {
      // no flags yet; review starts after finish-labelling
    }
    await this.redraw();
  }

  async redraw(): Promise<void> {
    if (!this.labelling) return;
    const state = this.labelling;
    this.canvas.width = state.video.width;
    this.canvas.height = state.video.height;
    const ctx = this.canvas.getContext("2d")!;

    const img = new Image();
    img.src = this.client.frameUrl(state.video.video_id, state.currentFrame);
    await img.decode().catch(() => undefined);
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (img.complete && img.naturalWidth > 0) ctx.drawImage(img, 0, 0);
    drawPoints(ctx, state.points, state.currentFrame);

    const flag = this.review?.current() ?? null;
    if (flag) drawFlag(ctx, flag);
    this.flagBox.textContent = flag
      ? `flag ${flag.index}: ${flag.keypoint} jumped ${flag.displacement.toFixed(1)} px ` +
        `at frame ${flag.frame} (threshold ${flag.threshold.toFixed(1)}). click its true position.`
      : this.review
        ? this.review.done
          ? "no outliers"
          : ""
        : "";

    const next = state.nextKeypoint();
    this.prompt.textContent = next
      ? `frame ${state.currentFrame}: click the ${next}`
      : "all prompted keypoints placed; finish labelling to run the tracker";
    const queued = state.unsubmitted().length;
    this.status.textContent = queued ? `${queued} point(s) queued for retry` : "synced";
  }

  clickPosition(ev: MouseEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    const scaleX = this.canvas.width / rect.width;
    const scaleY = this.canvas.height / rect.height;
    return { x: (ev.clientX - rect.left) * scaleX, y: (ev.clientY - rect.top) * scaleY };
  }

  async onCanvasClick(ev: MouseEvent): Promise<void> {
    if (!this.labelling) return;
    const { x, y } = this.clickPosition(ev);

    const flag = this.review?.current();
    if (flag) {
      // review mode: the click is the corrected position for the current flag
      try {
        await this.client.postCorrection(this.video.video_id, flag.index, x, y);
        this.review!.markCorrected(flag.index);
      } catch (err) {
        if (err instanceof ApiError && err.code === "already_corrected") {
          this.review = new ReviewState(await this.client.getOutliers(this.video.video_id));
        } else {
          this.status.textContent = String(err);
        }
      }
      await this.redraw();
      return;
    }

    if (this.labelling.placeAt(x, y) === null) {
      this.status.textContent = "click ignored: outside the frame or nothing left to label";
      return;
    }
    await flushPoints(this.labelling, this.client);
    await this.redraw();
  }

  onSkip(): void {
    if (!this.labelling) return;
    const answer = window.prompt("not visible here - jump to frame:", String(this.labelling.currentFrame + 1));
    if (answer === null) return;
    if (!this.labelling.skipToFrame(Number(answer))) {
      this.status.textContent = "skip target must be a later frame within the video";
      return;
    }
    void this.redraw();
  }

  onUndo(): void {
    if (this.labelling?.undo() === null) this.status.textContent = "nothing unsubmitted to undo";
    void this.redraw();
  }

  async onFinish(): Promise<void> {
    if (!this.labelling) return;
    const { failed } = await flushPoints(this.labelling, this.client);
    if (failed) {
      this.status.textContent = "cannot finish: some points are still unsynced";
      return;
    }
    const result = await this.client.finishLabelling(this.video.video_id);
    this.review = new ReviewState(await this.client.getOutliers(this.video.video_id));
    this.status.textContent = `tracking done, ${result.n_flags} outlier flag(s)`;
    await this.redraw();
  }

  async onRetrack(): Promise<void> {
    if (!this.review) return;
    try {
      const result = await this.client.retrack(this.video.video_id);
      this.review.reload(await this.client.getOutliers(this.video.video_id));
      this.status.textContent = `retracked (round ${result.round}), ${result.n_flags} flag(s) remain`;
    } catch (err) {
      this.status.textContent = err instanceof ApiError ? err.message : String(err);
    }
    await this.redraw();
  }

  onKey(ev: KeyboardEvent): void {
    if (!this.labelling) return;
    if (ev.key === "ArrowRight" || ev.key === "n") this.labelling.stepFrame(1);
    else if (ev.key === "ArrowLeft" || ev.key === "p") this.labelling.stepFrame(-1);
    else if (ev.key === "u") this.onUndo();
    else if (ev.key === "s") this.onSkip();
    else return;
    void this.redraw();
  }
}

new App().start().catch((err) => {
  document.body.textContent = `failed to reach the annotation service at ${SERVER}: ${err}`;
});
