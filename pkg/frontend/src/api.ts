// Thin typed client for the annotation service. All UI traffic goes
// through here; nothing else touches the network.

import type {
  Annotation,
  AnnotationsResponse,
  Mode,
  OutliersResponse,
  TrackingResult,
  VideoInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let code = "http_error";
      let message = `${resp.status} on ${path}`;
      try {
        const body = await resp.json();
        if (body?.detail?.code) {
          code = body.detail.code;
          message = body.detail.message ?? message;
        }
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  listVideos(): Promise<VideoInfo[]> {
    return this.request("/videos");
  }

  getAnnotations(videoId: string, mode?: Mode): Promise<AnnotationsResponse> {
    const query = mode ? `?mode=${mode}` : "";
    return this.request(`/videos/${videoId}/annotations${query}`);
  }

  postAnnotation(videoId: string, annotation: Annotation): Promise<{ ok: boolean; next_keypoint: string | null }> {
    return this.request(`/videos/${videoId}/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(annotation),
    });
  }

  finishLabelling(videoId: string): Promise<TrackingResult> {
    return this.request(`/videos/${videoId}/finish-labelling`, { method: "POST" });
  }

  getOutliers(videoId: string): Promise<OutliersResponse> {
    return this.request(`/videos/${videoId}/outliers`);
  }

  postCorrection(videoId: string, flagIndex: number, x: number, y: number): Promise<{ ok: boolean; pending: number }> {
    return this.request(`/videos/${videoId}/outliers/${flagIndex}/correction`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ x, y }),
    });
  }

  retrack(videoId: string): Promise<TrackingResult> {
    return this.request(`/videos/${videoId}/retrack`, { method: "POST" });
  }

  frameUrl(videoId: string, frame: number): string {
    return `${this.baseUrl}/videos/${videoId}/frames/${frame}`;
  }
}
