import type { ServiceClient } from './api.js';
import type { JobStatus } from './types.js';

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (status: JobStatus) => void;
  /** Injectable clock for tests. */
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Poll a job once a second until it reaches a terminal state. Resolves with
 * the final status for `done`, rejects for `failed` or on timeout.
 */
export async function pollJob(
  client: ServiceClient,
  projectId: string,
  jobId: string,
  options: PollOptions = {},
): Promise<JobStatus> {
  const interval = options.intervalMs ?? 1000;
  const deadline = Date.now() + (options.timeoutMs ?? 10 * 60 * 1000);
  const sleep = options.sleep ?? defaultSleep;
  for (;;) {
    const status = await client.getJob(projectId, jobId);
    options.onUpdate?.(status);
    if (status.state === 'done') {
      return status;
    }
    if (status.state === 'failed') {
      throw new Error(`job ${jobId} failed: ${status.message}`);
    }
    if (Date.now() > deadline) {
      throw new Error(`job ${jobId} timed out while ${status.state}`);
    }
    await sleep(interval);
  }
}
