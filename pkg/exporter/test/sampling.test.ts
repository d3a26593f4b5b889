import { describe, expect, it } from 'vitest';

import { RawVideo } from '../src/format';
import { clipFrameIndices, cropWindows, pooledCrop } from '../src/sampling';

describe('clip sampling', () => {
  it('takes uniform strides within each segment', () => {
    const ids = clipFrameIndices(40, 4, 0, 8);
    expect(ids).toHaveLength(8);
    expect(Math.min(...ids)).toBeGreaterThanOrEqual(0);
    expect(Math.max(...ids)).toBeLessThan(10); // first segment is frames 0..9
    const laterClip = clipFrameIndices(40, 4, 3, 8);
    expect(Math.min(...laterClip)).toBeGreaterThanOrEqual(30);
  });

  it('clamps to the last frame for short videos', () => {
    const ids = clipFrameIndices(5, 4, 3, 8);
    expect(ids.every(i => i >= 0 && i < 5)).toBe(true);
  });

  it('validates the clip index', () => {
    expect(() => clipFrameIndices(10, 4, 4, 8)).toThrow(/out of range/);
  });
});

describe('crop windows', () => {
  it('walks left, center, right along the wider axis', () => {
    const [l, c, r] = cropWindows(48, 64, 48, 3);
    expect(l.size).toBe(48);
    expect(l.left).toBe(0);
    expect(c.left).toBe(8);
    expect(r.left).toBe(16);
    expect([l.top, c.top, r.top]).toEqual([0, 0, 0]);
  });

  it('respects a smaller requested size', () => {
    const windows = cropWindows(48, 64, 32, 3);
    expect(windows.every(w => w.size === 32)).toBe(true);
    expect(windows[2].left).toBe(32);
  });
});

describe('pooled crops', () => {
  it('reduces a constant image to its constant value', () => {
    const video: RawVideo = {
      frameCount: 2,
      height: 16,
      width: 16,
      channels: 3,
      pixels: new Uint8Array(2 * 16 * 16 * 3).fill(102),
    };
    const patch = pooledCrop(video, 1, { top: 0, left: 0, size: 16 }, 4);
    expect(patch).toHaveLength(4 * 4 * 3);
    for (const value of patch) {
      expect(value).toBeCloseTo(102 / 255, 10);
    }
  });
});
