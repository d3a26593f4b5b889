import { mkdtempSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { describe, expect, it } from 'vitest';

import {
  FeatureRecord,
  RawVideo,
  decodeFeatureFile,
  encodeFeatureFile,
  encodeRawVideo,
  readRawVideo,
} from '../src/format';

function sampleRecord(videoId: string, viewId: number): FeatureRecord {
  const frames = new Float32Array(3 * 4);
  for (let i = 0; i < frames.length; i++) frames[i] = Math.fround(Math.sin(i) * 10);
  return { videoId, viewId, labelIndex: 2, frames, frameCount: 3, dim: 4 };
}

describe('feature container', () => {
  it('round-trips records bit-exactly', () => {
    const records = [sampleRecord('vid a', 0), sampleRecord('vid é', 7)];
    const decoded = decodeFeatureFile(encodeFeatureFile(records));
    expect(decoded).toHaveLength(2);
    for (let i = 0; i < 2; i++) {
      expect(decoded[i].videoId).toBe(records[i].videoId);
      expect(decoded[i].viewId).toBe(records[i].viewId);
      expect(decoded[i].labelIndex).toBe(2);
      expect(Array.from(decoded[i].frames)).toEqual(Array.from(records[i].frames));
    }
  });

  it('rejects inconsistent shapes at write time', () => {
    const bad = { ...sampleRecord('v', 0), dim: 7 };
    expect(() => encodeFeatureFile([bad])).toThrow(/T\*D/);
  });

  it('rejects bad magic and truncation at read time', () => {
    const payload = encodeFeatureFile([sampleRecord('v', 0)]);
    const badMagic = Buffer.from(payload);
    badMagic.write('XXXX', 0, 'ascii');
    expect(() => decodeFeatureFile(badMagic)).toThrow(/magic/);
    expect(() => decodeFeatureFile(payload.subarray(0, payload.length - 3)))
      .toThrow(/truncated/);
  });
});

describe('raw video container', () => {
  const video: RawVideo = {
    frameCount: 3,
    height: 4,
    width: 5,
    channels: 3,
    pixels: new Uint8Array(3 * 4 * 5 * 3).map((_, i) => i % 251),
  };

  it('round-trips through a file', () => {
    const dir = mkdtempSync(join(tmpdir(), 'rvid-'));
    const path = join(dir, 'clip.rvid');
    writeFileSync(path, encodeRawVideo(video));
    const loaded = readRawVideo(path);
    expect(loaded.frameCount).toBe(3);
    expect(loaded.height).toBe(4);
    expect(loaded.width).toBe(5);
    expect(Array.from(loaded.pixels)).toEqual(Array.from(video.pixels));
  });

  it('rejects malformed headers', () => {
    const dir = mkdtempSync(join(tmpdir(), 'rvid-'));
    const path = join(dir, 'bad.rvid');
    writeFileSync(path, Buffer.from('not a video at all'));
    expect(() => readRawVideo(path)).toThrow(/not a raw video/);
    const short = encodeRawVideo(video).subarray(0, 30);
    writeFileSync(path, short);
    expect(() => readRawVideo(path)).toThrow(/malformed/);
  });
});
