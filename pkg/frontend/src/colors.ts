// Keypoint color legend, one distinct color per landmark. The same hues
// the reviewers know from the labelling tool's reference sheet.

export const KEYPOINT_COLORS: Record<string, string> = {
  "nose": "#e6194b",
  "head bottom": "#3cb44b",
  "head top": "#ffe119",
  "left ear": "#4363d8",
  "right ear": "#f58231",
  "left shoulder": "#911eb4",
  "right shoulder": "#46f0f0",
  "left elbow": "#f032e6",
  "right elbow": "#bcf60c",
  "left wrist": "#fabebe",
  "right wrist": "#008080",
  "left hip": "#e6beff",
  "right hip": "#9a6324",
  "left knee": "#fffac8",
  "right knee": "#800000",
  "left ankle": "#aaffc3",
  "right ankle": "#808000",
};

export function colorFor(keypoint: string): string {
  return KEYPOINT_COLORS[keypoint] ?? "#606060";
}
