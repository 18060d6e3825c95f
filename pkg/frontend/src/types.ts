// Payload shapes of the annotation service API.

export type Mode = "extreme" | "all";

export interface VideoInfo {
  video_id: string;
  subject_id: string;
  age_group: string;
  label: number;
  fps: number;
  width: number;
  height: number;
  n_frames: number;
}

export interface Annotation {
  keypoint: string;
  frame: number;
  x: number;
  y: number;
}

export interface AnnotationsResponse {
  video_id: string;
  mode: Mode;
  prompt_order: string[];
  next_keypoint: string | null;
  annotations: Annotation[];
}

export interface OutlierFlag {
  index: number;
  keypoint: string;
  frame: number;
  displacement: number;
  threshold: number;
  corrected: boolean;
  from: [number, number];
  to: [number, number];
}

export interface OutliersResponse {
  video_id: string;
  round: number;
  flags: OutlierFlag[];
}

export interface TrackingResult {
  ok: boolean;
  n_flags: number;
  round: number;
}
