export interface Project {
  id: string;
  name: string;
  dataset: string | null;
  model: string | null;
  frame_count?: number | null;
  resolution?: [number, number];
  fps?: number;
}

export type JobState = 'queued' | 'running' | 'done' | 'failed';

export interface JobStatus {
  id: string;
  kind: string;
  state: JobState;
  progress: number;
  message: string;
  config: Record<string, unknown>;
  result?: Record<string, unknown>;
}

/** One keyframe on the timeline: a dataset frame index or an uploaded image. */
export interface TimelineEntry {
  /** Dataset frame index, or a data URL for an uploaded image. */
  ref: number | string;
  holdSeconds: string;
  transitionSeconds: string;
}

export interface BlendSettings {
  alpha: string;
  beta: string;
  lambda: string;
  k: string;
}

export interface PreviewRequestConfig {
  keys: number[];
  seconds: number;
  hold: number;
  fps: number;
  mode: 'linear' | 'spline';
  denoise: boolean;
  alpha: number;
  beta: number;
  lambda: number;
  k: number;
  [extra: string]: unknown;
}
