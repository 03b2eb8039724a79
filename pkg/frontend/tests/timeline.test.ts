import { describe, expect, it } from 'vitest';

import { TimelineModel, configRoundTripsExactly } from '../src/timeline.js';

describe('TimelineModel', () => {
  it('adds, moves, and removes keyframes', () => {
    const t = new TimelineModel();
    t.addKeyframe(3);
    t.addKeyframe(40);
    t.addKeyframe(99);
    t.moveKeyframe(2, 0);
    expect(t.entries.map((e) => e.ref)).toEqual([99, 3, 40]);
    t.removeKeyframe(1);
    expect(t.entries.map((e) => e.ref)).toEqual([99, 40]);
  });

  it('requires at least two keyframes', () => {
    const t = new TimelineModel();
    t.addKeyframe(1);
    expect(t.validate()).toContainEqual({ entry: -1, message: 'pick at least 2 keyframes' });
    t.addKeyframe(2);
    expect(t.validate()).toEqual([]);
  });

  it('flags bad durations at the offending entry', () => {
    const t = new TimelineModel();
    t.addKeyframe(1, '0');
    t.addKeyframe(2, '1', '-3');
    const issues = t.validate();
    expect(issues.some((i) => i.entry === 0 && i.message.includes('transition'))).toBe(true);
    expect(issues.some((i) => i.entry === 1 && i.message.includes('hold'))).toBe(true);
  });

  it('flags out-of-range parameters', () => {
    const t = new TimelineModel();
    t.addKeyframe(1);
    t.addKeyframe(2);
    t.blend.lambda = '-4';
    t.blend.k = '0';
    t.fps = 'nope';
    const messages = t.validate().map((i) => i.message);
    expect(messages).toContain('lambda is out of range');
    expect(messages).toContain('k is out of range');
    expect(messages).toContain('fps must be positive');
  });

  it('computes the expected preview frame count', () => {
    const t = new TimelineModel();
    t.fps = '10';
    t.addKeyframe(0, '1', '0');
    t.addKeyframe(20, '1', '0');
    expect(t.expectedFrameCount()).toBe(10);
    t.entries[0].holdSeconds = '0.5';
    expect(t.expectedFrameCount()).toBe(15);
  });

  it('serializes to the interpolate config', () => {
    const t = new TimelineModel();
    t.fps = '10';
    t.denoise = false;
    t.blend = { alpha: '1.5', beta: '0.5', lambda: '42.5', k: '3' };
    t.addKeyframe(2, '1');
    t.addKeyframe(30, '1');
    expect(t.toJobConfig()).toEqual({
      keys: [2, 30],
      seconds: 1,
      hold: 0,
      fps: 10,
      mode: 'linear',
      denoise: false,
      alpha: 1.5,
      beta: 0.5,
      lambda: 42.5,
      k: 3,
    });
  });

  it('refuses to serialize unresolved uploaded keyframes', () => {
    const t = new TimelineModel();
    t.addKeyframe('data:image/png;base64,xyz');
    t.addKeyframe(5);
    expect(() => t.toJobConfig()).toThrow(/uploaded keyframes/);
  });
});

describe('configRoundTripsExactly', () => {
  it('accepts identical configs', () => {
    const config = { keys: [1, 2], lambda: 42.5, denoise: true };
    expect(configRoundTripsExactly(config, JSON.parse(JSON.stringify(config)))).toBe(true);
  });

  it('rejects any drifted value or dropped key', () => {
    expect(configRoundTripsExactly({ lambda: 42.5 }, { lambda: 42.50001 })).toBe(false);
    expect(configRoundTripsExactly({ lambda: 42.5, k: 5 }, { lambda: 42.5 })).toBe(false);
    expect(configRoundTripsExactly({ keys: [1, 2] }, { keys: [2, 1] })).toBe(false);
  });
});
