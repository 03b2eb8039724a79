import type { BlendSettings, PreviewRequestConfig, TimelineEntry } from './types.js';

export interface ValidationIssue {
  /** Index of the offending timeline entry, or -1 for a global problem. */
  entry: number;
  message: string;
}

const DEFAULT_BLEND: BlendSettings = { alpha: '1', beta: '1', lambda: '50', k: '5' };

/**
 * Local editing model for the keyframe timeline. Edits stay client-side
 * until a preview is requested; validation mirrors the server contract
 * (at least two keyframes, positive durations) so bad submissions are
 * caught inline at the offending entry.
 */
export class TimelineModel {
  entries: TimelineEntry[] = [];
  blend: BlendSettings = { ...DEFAULT_BLEND };
  fps = '10';
  mode: 'linear' | 'spline' = 'linear';
  denoise = true;

  addKeyframe(ref: number | string, transitionSeconds = '1', holdSeconds = '0'): TimelineEntry {
    const entry: TimelineEntry = { ref, transitionSeconds, holdSeconds };
    this.entries.push(entry);
    return entry;
  }

  removeKeyframe(index: number): void {
    this.entries.splice(index, 1);
  }

  moveKeyframe(from: number, to: number): void {
    const [entry] = this.entries.splice(from, 1);
    this.entries.splice(to, 0, entry);
  }

  validate(): ValidationIssue[] {
    const issues: ValidationIssue[] = [];
    if (this.entries.length < 2) {
      issues.push({ entry: -1, message: 'pick at least 2 keyframes' });
    }
    this.entries.forEach((entry, i) => {
      const transition = Number(entry.transitionSeconds);
      const hold = Number(entry.holdSeconds);
      if (!Number.isFinite(transition) || transition <= 0) {
        issues.push({ entry: i, message: 'transition must be a positive number of seconds' });
      }
      if (!Number.isFinite(hold) || hold < 0) {
        issues.push({ entry: i, message: 'hold must be zero or more seconds' });
      }
    });
    const fps = Number(this.fps);
    if (!Number.isFinite(fps) || fps <= 0) {
      issues.push({ entry: -1, message: 'fps must be positive' });
    }
    for (const [name, text] of Object.entries(this.blend)) {
      const value = Number(text);
      if (!Number.isFinite(value) || value < 0 || (name === 'k' && value < 1)) {
        issues.push({ entry: -1, message: `${name} is out of range` });
      }
    }
    return issues;
  }

  /** Expected preview strip length: one segment per consecutive pair. */
  expectedFrameCount(): number {
    const fps = Number(this.fps);
    let total = 0;
    this.entries.forEach((entry, i) => {
      total += Math.floor(Number(entry.holdSeconds) * fps + 0.5);
      if (i < this.entries.length - 1) {
        total += Math.floor(Number(entry.transitionSeconds) * fps + 0.5);
      }
    });
    return total;
  }

  /**
   * Serialize for the interpolate endpoint. Only dataset-index keyframes are
   * supported server-side for now; uploaded images must be resolved to an
   * index before submission.
   */
  toJobConfig(): PreviewRequestConfig {
    const indices = this.entries.map((entry) => {
      if (typeof entry.ref !== 'number') {
        throw new Error('uploaded keyframes must be matched to a dataset frame before submission');
      }
      return entry.ref;
    });
    return {
      keys: indices,
      seconds: Number(this.entries[0]?.transitionSeconds ?? '1'),
      hold: Number(this.entries[0]?.holdSeconds ?? '0'),
      fps: Number(this.fps),
      mode: this.mode,
      denoise: this.denoise,
      alpha: Number(this.blend.alpha),
      beta: Number(this.blend.beta),
      lambda: Number(this.blend.lambda),
      k: Number(this.blend.k),
    };
  }
}

/**
 * String-exact round-trip check: every parameter the user typed must come
 * back verbatim in the job config echoed by the server.
 */
export function configRoundTripsExactly(
  submitted: Record<string, unknown>,
  echoed: Record<string, unknown>,
): boolean {
  const keys = new Set([...Object.keys(submitted), ...Object.keys(echoed)]);
  for (const key of keys) {
    if (JSON.stringify(submitted[key]) !== JSON.stringify(echoed[key])) {
      return false;
    }
  }
  return true;
}
