// Acceptance checks for the studio UI: project load shows the frame count,
// a 2-keyframe 1s/10fps preview produces a 10-frame strip, parameters
// round-trip string-exact, and offline mode degrades to a banner.
import { beforeEach, describe, expect, it, vi } from 'vitest';

import { ServiceClient } from '../src/api.js';
import { StudioApp } from '../src/app.js';
import { MockService } from './mockService.js';

function makeApp(mock: MockService) {
  document.body.innerHTML = '<div id="app"></div>';
  const client = new ServiceClient('', mock.fetcher);
  return new StudioApp(document, client, document.getElementById('app') as HTMLElement);
}

async function settle() {
  // polling uses real 1s timers; fake them for the app-level tests
  await vi.advanceTimersByTimeAsync(30_000);
}

describe('StudioApp', () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  it('loading a project shows the correct frame count', async () => {
    const mock = new MockService({ frameCount: 300 });
    const app = makeApp(mock);
    await app.open('p1');
    expect(document.querySelector('.frame-count')?.textContent).toBe('300 frames');
    const slider = document.querySelector('input[type="range"]') as HTMLInputElement;
    expect([slider.min, slider.max]).toEqual(['0', '299']);
  });

  it('a 2-keyframe 1s 10fps preview yields a 10-frame strip per view', async () => {
    const mock = new MockService({ frameCount: 300, pollsUntilDone: 1 });
    const app = makeApp(mock);
    await app.open('p1');
    app.timeline.fps = '10';
    app.timeline.addKeyframe(2, '1');
    app.timeline.addKeyframe(120, '1');
    const done = app.runPreview();
    await settle();
    await done;
    const strips = document.querySelectorAll('.preview-strip');
    expect(strips).toHaveLength(2);
    expect(strips[0].querySelectorAll('img')).toHaveLength(10);
    expect(strips[1].querySelectorAll('img')).toHaveLength(10);
    expect(document.querySelector('.round-trip-warning')).toBeNull(); // params echoed exactly
  });

  it('parameter values round-trip string-exact into the job config', async () => {
    const mock = new MockService({ frameCount: 300, pollsUntilDone: 1 });
    const app = makeApp(mock);
    await app.open('p1');
    app.timeline.addKeyframe(1, '1');
    app.timeline.addKeyframe(9, '1');
    app.timeline.blend = { alpha: '1.25', beta: '0.5', lambda: '42.5', k: '3' };
    app.timeline.fps = '10';
    const done = app.runPreview();
    await settle();
    await done;
    const posted = mock.calls.filter((c) => c.method === 'POST');
    expect(posted.length).toBeGreaterThan(0);
    posted.forEach((call, i) => {
      const config = (call.body as { config: Record<string, unknown> }).config;
      expect(String(config.alpha)).toBe('1.25');
      expect(String(config.beta)).toBe('0.5');
      expect(String(config.lambda)).toBe('42.5');
      expect(String(config.k)).toBe('3');
      const echoed = mock.jobs.get(`job${i + 1}`)!; // job ids are sequential per submission
      expect(JSON.stringify(echoed.config)).toBe(JSON.stringify(config));
    });
  });

  it('a single keyframe is rejected inline without a request', async () => {
    const mock = new MockService({ frameCount: 300 });
    const app = makeApp(mock);
    await app.open('p1');
    const callsAfterLoad = mock.calls.length;
    app.timeline.addKeyframe(5, '1');
    app.renderTimeline();
    await app.runPreview();
    expect(document.querySelector('.global-issues')?.textContent).toContain('at least 2 keyframes');
    expect(mock.calls.length).toBe(callsAfterLoad); // nothing submitted
  });

  it('bad durations surface inline at the offending entry', async () => {
    const mock = new MockService({ frameCount: 300 });
    const app = makeApp(mock);
    await app.open('p1');
    const callsAfterLoad = mock.calls.length;
    app.timeline.addKeyframe(3, '0'); // invalid transition on entry 0
    app.timeline.addKeyframe(9, '1');
    app.renderTimeline();
    await app.runPreview();
    const box = document.querySelector('li[data-entry="0"] .entry-issues');
    expect(box?.textContent).toContain('transition');
    expect(mock.calls.length).toBe(callsAfterLoad);
  });

  it('offline mode shows a banner without crashing', async () => {
    const mock = new MockService({ frameCount: 300 });
    const app = makeApp(mock);
    await app.open('p1');
    mock.offline = true;
    await app.reload();
    expect(app.banner.visible).toBe(true);
    expect(document.querySelector('.offline-banner')?.hasAttribute('hidden')).toBe(false);
    // retry recovers once the service is back
    mock.offline = false;
    await app.reload();
    expect(app.banner.visible).toBe(false);
  });

  it('picking thumbnails adds timeline entries', async () => {
    const mock = new MockService({ frameCount: 80 });
    const app = makeApp(mock);
    await app.open('p1');
    const thumbs = document.querySelectorAll('.thumb-grid img');
    (thumbs[42] as HTMLElement).click();
    expect(app.timeline.entries.map((e) => e.ref)).toEqual([42]);
    expect(document.querySelectorAll('.timeline-entries li')).toHaveLength(1);
  });
});
