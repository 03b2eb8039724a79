import { describe, expect, it } from 'vitest';

import { ServiceClient } from '../src/api.js';
import { requestComparison, requestPreview, stripElement, ValidationFailed } from '../src/preview.js';
import { TimelineModel } from '../src/timeline.js';
import { MockService, instantSleep } from './mockService.js';

function timelineWith(keys: number[], fps = '10', transition = '1') {
  const t = new TimelineModel();
  t.fps = fps;
  for (const k of keys) {
    t.addKeyframe(k, transition);
  }
  return t;
}

describe('requestPreview', () => {
  it('one second at 10 fps yields a 10-frame strip', async () => {
    const mock = new MockService();
    const client = new ServiceClient('', mock.fetcher);
    const strip = await requestPreview(client, 'p1', timelineWith([2, 30]), {}, { sleep: instantSleep });
    expect(strip.frameUrls).toHaveLength(10);
    expect(strip.frameUrls[0]).toContain(`/projects/p1/render/${strip.jobId}/0`);
    expect(strip.frameUrls[9]).toContain(`/projects/p1/render/${strip.jobId}/9`);
  });

  it('echoed config round-trips string-exact', async () => {
    const mock = new MockService();
    const client = new ServiceClient('', mock.fetcher);
    const timeline = timelineWith([2, 30]);
    timeline.blend = { alpha: '1.25', beta: '0.75', lambda: '42.5', k: '4' };
    const strip = await requestPreview(client, 'p1', timeline, {}, { sleep: instantSleep });
    expect(strip.roundTripExact).toBe(true);
    expect(strip.config.lambda).toBe(42.5);
    expect(String(strip.config.lambda)).toBe(timeline.blend.lambda);
  });

  it('invalid timelines never reach the server', async () => {
    const mock = new MockService();
    const client = new ServiceClient('', mock.fetcher);
    const err = await requestPreview(client, 'p1', timelineWith([5]), {}, { sleep: instantSleep }).catch(
      (e) => e,
    );
    expect(err).toBeInstanceOf(ValidationFailed);
    expect(mock.calls).toHaveLength(0);
  });

  it('different blend parameters submit different configs', async () => {
    const mock = new MockService();
    const client = new ServiceClient('', mock.fetcher);
    const timeline = timelineWith([2, 30]);
    timeline.blend.lambda = '10';
    await requestPreview(client, 'p1', timeline, {}, { sleep: instantSleep });
    timeline.blend.lambda = '1000';
    await requestPreview(client, 'p1', timeline, {}, { sleep: instantSleep });
    const posts = mock.calls.filter((c) => c.method === 'POST');
    const configs = posts.map((c) => (c.body as { config: { lambda: number } }).config.lambda);
    expect(configs).toEqual([10, 1000]);
  });
});

describe('requestComparison', () => {
  it('renders generator-only and denoised strips from the same timeline', async () => {
    const mock = new MockService();
    const client = new ServiceClient('', mock.fetcher);
    const { raw, denoised } = await requestComparison(client, 'p1', timelineWith([2, 30]), {
      sleep: instantSleep,
    });
    expect(raw.config.denoise).toBe(false);
    expect(denoised.config.denoise).toBe(true);
    expect(raw.frameUrls).toHaveLength(10);
    expect(denoised.frameUrls).toHaveLength(10);
    expect(raw.jobId).not.toBe(denoised.jobId);
  });
});

describe('stripElement', () => {
  it('builds an image row with a caption', () => {
    const strip = {
      jobId: 'j1',
      frameUrls: ['/a', '/b', '/c'],
      config: {},
      roundTripExact: true,
    };
    const el = stripElement(document, strip, 'generator');
    expect(el.querySelectorAll('img')).toHaveLength(3);
    expect(el.querySelector('figcaption')?.textContent).toContain('3 frames');
  });
});
