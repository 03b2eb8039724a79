import { describe, expect, it } from 'vitest';

import { ServiceClient } from '../src/api.js';
import { pollJob } from '../src/polling.js';
import { MockService, instantSleep } from './mockService.js';

describe('pollJob', () => {
  it('polls until the job reports done', async () => {
    const mock = new MockService({ pollsUntilDone: 3 });
    const client = new ServiceClient('', mock.fetcher);
    const job = await client.submitJob('p1', 'interpolate', { keys: [1, 2], seconds: 1, fps: 10 });
    const seen: string[] = [];
    const status = await pollJob(client, 'p1', job.id, {
      sleep: instantSleep,
      onUpdate: (s) => seen.push(s.state),
    });
    expect(status.state).toBe('done');
    expect(seen).toEqual(['running', 'running', 'done']);
    expect(status.result?.frames).toBe(10);
  });

  it('rejects when the job fails', async () => {
    const mock = new MockService({ pollsUntilDone: 1, failJobs: true });
    const client = new ServiceClient('', mock.fetcher);
    const job = await client.submitJob('p1', 'train-manifold', {});
    await expect(pollJob(client, 'p1', job.id, { sleep: instantSleep })).rejects.toThrow(/failed/);
  });

  it('times out on jobs that never finish', async () => {
    const mock = new MockService({ pollsUntilDone: 10_000 });
    const client = new ServiceClient('', mock.fetcher);
    const job = await client.submitJob('p1', 'train-gan', {});
    await expect(
      pollJob(client, 'p1', job.id, { sleep: instantSleep, timeoutMs: -1 }),
    ).rejects.toThrow(/timed out/);
  });
});
