import type { ServiceClient } from './api.js';
import { pollJob, type PollOptions } from './polling.js';
import { TimelineModel, configRoundTripsExactly, type ValidationIssue } from './timeline.js';
import type { JobStatus } from './types.js';

export interface PreviewStrip {
  jobId: string;
  frameUrls: string[];
  config: Record<string, unknown>;
  roundTripExact: boolean;
}

export class ValidationFailed extends Error {
  constructor(readonly issues: ValidationIssue[]) {
    super(issues.map((issue) => `[${issue.entry}] ${issue.message}`).join('; '));
  }
}

/**
 * Submit one interpolate job for the timeline and poll it to completion.
 * Returns the rendered strip's frame URLs; `denoise` in the config decides
 * whether this is the raw generator strip or the detail-transferred one.
 */
export async function requestPreview(
  client: ServiceClient,
  projectId: string,
  timeline: TimelineModel,
  overrides: Record<string, unknown> = {},
  poll: PollOptions = {},
): Promise<PreviewStrip> {
  const issues = timeline.validate();
  if (issues.length > 0) {
    throw new ValidationFailed(issues);
  }
  const config = { ...timeline.toJobConfig(), ...overrides };
  const submitted = await client.submitJob(projectId, 'interpolate', config);
  const done: JobStatus = await pollJob(client, projectId, submitted.id, poll);
  const frames = Number(done.result?.frames ?? 0);
  return {
    jobId: done.id,
    frameUrls: Array.from({ length: frames }, (_, i) => client.renderFrameUrl(projectId, done.id, i)),
    config: done.config,
    roundTripExact: configRoundTripsExactly(config, done.config),
  };
}

/**
 * The comparison view: the same timeline rendered twice, generator-only on
 * top and denoised below.
 */
export async function requestComparison(
  client: ServiceClient,
  projectId: string,
  timeline: TimelineModel,
  poll: PollOptions = {},
): Promise<{ raw: PreviewStrip; denoised: PreviewStrip }> {
  const raw = await requestPreview(client, projectId, timeline, { denoise: false }, poll);
  const denoised = await requestPreview(client, projectId, timeline, { denoise: true }, poll);
  return { raw, denoised };
}

/** Render a strip into a row of <img> nodes. */
export function stripElement(doc: Document, strip: PreviewStrip, label: string): HTMLElement {
  const row = doc.createElement('figure');
  row.className = 'preview-strip';
  const caption = doc.createElement('figcaption');
  caption.textContent = `${label} (${strip.frameUrls.length} frames)`;
  row.appendChild(caption);
  const track = doc.createElement('div');
  track.className = 'strip-track';
  for (const url of strip.frameUrls) {
    const img = doc.createElement('img');
    img.src = url;
    img.loading = 'lazy';
    track.appendChild(img);
  }
  row.appendChild(track);
  return row;
}
