// Scripted end-to-end round trip against a real annotation service:
// label the 9 extreme keypoints, finish labelling (the mock tracker loses
// one point on purpose), receive the outlier flag, post a correction,
// retrack, and verify both that the detector comes back empty and that the
// server-side track file reflects the correction.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { LabellingState, ReviewState, flushPoints } from "../src/state.js";

const PORT = 8700 + Math.floor(Math.random() * 800);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let work: string;

async function waitForServer(client: ApiClient, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown;
  while (Date.now() < deadline) {
    try {
      await client.listVideos();
      return;
    } catch (err) {
      lastError = err;
      await new Promise((r) => setTimeout(r, 250));
    }
  }
  throw new Error(`service did not come up on ${BASE}: ${String(lastError)}`);
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "gmakit-ui-"));
  execFileSync("python3", [
    "-m", "gmakit.cli", "synth",
    "--subjects", "1", "--seed", "21", "--occlusion", "0",
    "--duration-min", "10", "--duration-max", "11",
    "--out", join(work, "data"),
  ]);
  server = spawn("python3", [
    "-m", "gmakit.cli", "serve",
    "--manifest", join(work, "data", "manifest.csv"),
    "--data-dir", join(work, "annotations"),
    "--tracker", "inject-jump",
    "--port", String(PORT),
  ], { stdio: "ignore" });
  await waitForServer(new ApiClient(BASE));
}, 60_000);

afterAll(() => {
  server?.kill();
});

describe("labelling and outlier review against the live service", () => {
  const client = new ApiClient(BASE);

  it("completes the full round trip", async () => {
    const videos = await client.listVideos();
    expect(videos).toHaveLength(1);
    const video = videos[0]!;
    expect(video.n_frames).toBeGreaterThanOrEqual(290);

    // --- label the 9 extreme keypoints through the client state machine
    const state = new LabellingState(video, await client.getAnnotations(video.video_id, "extreme"));
    expect(state.promptOrder).toHaveLength(9);
    expect(state.promptOrder[0]).toBe("head top");

    const placedAt: Record<string, [number, number]> = {};
    let i = 0;
    while (!state.complete) {
      const keypoint = state.nextKeypoint()!;
      const x = 120 + 14 * i;
      const y = 160 + 6 * i;
      expect(state.placeAt(x, y)).not.toBeNull();
      placedAt[keypoint] = [x, y];
      i++;
    }
    expect(i).toBe(9);
    const flushed = await flushPoints(state, client);
    expect(flushed).toEqual({ sent: 9, failed: 0 });

    // reloading reproduces the server state exactly, session mode included
    const fresh = new LabellingState(video, await client.getAnnotations(video.video_id));
    expect(fresh.mode).toBe("extreme");
    expect(fresh.points.filter((p) => p.submitted)).toHaveLength(9);
    expect(fresh.complete).toBe(true);

    // --- tracking produces exactly one injected outlier flag
    const tracked = await client.finishLabelling(video.video_id);
    expect(tracked.n_flags).toBe(1);

    const review = new ReviewState(await client.getOutliers(video.video_id));
    const flag = review.current()!;
    expect(flag.keypoint).toBe("head top");
    expect(flag.displacement).toBeGreaterThan(flag.threshold);
    const [headX, headY] = placedAt["head top"]!;
    expect(flag.from).toEqual([headX, headY]);
    expect(flag.to).toEqual([headX + 160, headY]);

    // --- correct it back to where it was placed, then retrack
    await client.postCorrection(video.video_id, flag.index, headX, headY);
    review.markCorrected(flag.index);
    expect(review.done).toBe(true);

    const after = await client.retrack(video.video_id);
    expect(after.n_flags).toBe(0);
    review.reload(await client.getOutliers(video.video_id));
    expect(review.done).toBe(true);
    expect(review.flags).toHaveLength(0);

    // --- the server-side track file reflects the correction
    const trackCsv = readFileSync(join(work, "annotations", "tracks", `${video.video_id}.csv`), "utf-8");
    const headTopRows = trackCsv
      .split(/\r?\n/)
      .filter((line) => line.startsWith("head top,"))
      .map((line) => line.split(","));
    expect(headTopRows.length).toBe(video.n_frames);
    for (const row of headTopRows) {
      const frame = Number(row[1]);
      if (frame >= flag.frame) {
        expect(Number(row[2])).toBe(headX);
        expect(Number(row[3])).toBe(headY);
        expect(row[4]).toBe("1");
      }
    }

    // frames are always renderable
    const png = await fetch(client.frameUrl(video.video_id, 0));
    expect(png.status).toBe(200);
    expect(png.headers.get("content-type")).toBe("image/png");
  }, 60_000);

  it("rejects invalid annotations with machine-readable codes", async () => {
    const bad = await client
      .postAnnotation("V000", { keypoint: "left wing", frame: 0, x: 1, y: 1 })
      .catch((e) => e);
    expect(bad.status).toBe(422);
    expect(bad.code).toBe("unknown_keypoint");

    const oob = await client
      .postAnnotation("V000", { keypoint: "nose", frame: 0, x: 99999, y: 1 })
      .catch((e) => e);
    expect(oob.code).toBe("out_of_bounds");

    const missing = await client.getAnnotations("NOPE").catch((e) => e);
    expect(missing.status).toBe(404);
  });
});
