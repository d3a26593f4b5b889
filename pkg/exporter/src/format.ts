/**
 * Binary formats shared with the primary package.
 *
 * Feature container (.mcfv): magic "MCFV", version byte 0x01, u32 record
 * count, then per record u32 id length, UTF-8 video id, u32 view id,
 * u32 label index, u32 T, u32 D, and T*D float32 values, row-major.
 * All integers and floats are little-endian.
 *
 * Raw video container (.rvid): magic "RVID", version byte 0x01, then
 * u32 frameCount, u32 height, u32 width, u32 channels, followed by
 * frameCount * height * width * channels uint8 samples (frame-major,
 * row-major, channel-last RGB).
 */

import { readFileSync } from 'fs';

export interface FeatureRecord {
  videoId: string;
  viewId: number;
  labelIndex: number;
  /** T x D frame features, row-major */
  frames: Float32Array;
  frameCount: number;
  dim: number;
}

export interface RawVideo {
  frameCount: number;
  height: number;
  width: number;
  channels: number;
  /** frame-major, row-major, channel-last uint8 samples */
  pixels: Uint8Array;
}

const FEATURE_MAGIC = 'MCFV';
const RAW_MAGIC = 'RVID';
const VERSION = 0x01;

export function encodeFeatureFile(records: FeatureRecord[]): Buffer {
  const chunks: Buffer[] = [];
  const header = Buffer.alloc(9);
  header.write(FEATURE_MAGIC, 0, 'ascii');
  header.writeUInt8(VERSION, 4);
  header.writeUInt32LE(records.length, 5);
  chunks.push(header);
  for (const rec of records) {
    if (rec.frames.length !== rec.frameCount * rec.dim) {
      throw new Error(
        `record ${rec.videoId}: frames length ${rec.frames.length} != T*D ` +
        `${rec.frameCount * rec.dim}`);
    }
    const id = Buffer.from(rec.videoId, 'utf-8');
    const meta = Buffer.alloc(4 + id.length + 16);
    meta.writeUInt32LE(id.length, 0);
    id.copy(meta, 4);
    meta.writeUInt32LE(rec.viewId, 4 + id.length);
    meta.writeUInt32LE(rec.labelIndex, 8 + id.length);
    meta.writeUInt32LE(rec.frameCount, 12 + id.length);
    meta.writeUInt32LE(rec.dim, 16 + id.length);
    chunks.push(meta);
    const matrix = Buffer.alloc(rec.frames.length * 4);
    for (let i = 0; i < rec.frames.length; i++) {
      matrix.writeFloatLE(rec.frames[i], i * 4);
    }
    chunks.push(matrix);
  }
  return Buffer.concat(chunks);
}

/** Parse a feature container; used by the tests to verify round-trips. */
export function decodeFeatureFile(payload: Buffer): FeatureRecord[] {
  let pos = 0;
  const take = (n: number, what: string): Buffer => {
    if (pos + n > payload.length) {
      throw new Error(`truncated while reading ${what} at offset ${pos}`);
    }
    const out = payload.subarray(pos, pos + n);
    pos += n;
    return out;
  };
  const u32 = (what: string) => take(4, what).readUInt32LE(0);

  if (take(4, 'magic').toString('ascii') !== FEATURE_MAGIC) {
    throw new Error('bad magic');
  }
  if (take(1, 'version')[0] !== VERSION) {
    throw new Error('unsupported version');
  }
  const count = u32('record count');
  const records: FeatureRecord[] = [];
  for (let r = 0; r < count; r++) {
    const idLen = u32('id length');
    const videoId = take(idLen, 'video id').toString('utf-8');
    const viewId = u32('view id');
    const labelIndex = u32('label index');
    const frameCount = u32('frame count');
    const dim = u32('dim');
    const matrix = take(frameCount * dim * 4, 'frame matrix');
    const frames = new Float32Array(frameCount * dim);
    for (let i = 0; i < frames.length; i++) {
      frames[i] = matrix.readFloatLE(i * 4);
    }
    records.push({ videoId, viewId, labelIndex, frames, frameCount, dim });
  }
  if (pos !== payload.length) {
    throw new Error(`${payload.length - pos} trailing bytes`);
  }
  return records;
}

export function encodeRawVideo(video: RawVideo): Buffer {
  const expected = video.frameCount * video.height * video.width * video.channels;
  if (video.pixels.length !== expected) {
    throw new Error(`pixel payload ${video.pixels.length} != expected ${expected}`);
  }
  const header = Buffer.alloc(21);
  header.write(RAW_MAGIC, 0, 'ascii');
  header.writeUInt8(VERSION, 4);
  header.writeUInt32LE(video.frameCount, 5);
  header.writeUInt32LE(video.height, 9);
  header.writeUInt32LE(video.width, 13);
  header.writeUInt32LE(video.channels, 17);
  return Buffer.concat([header, Buffer.from(video.pixels)]);
}

export function readRawVideo(path: string): RawVideo {
  const payload = readFileSync(path);
  if (payload.length < 21 || payload.subarray(0, 4).toString('ascii') !== RAW_MAGIC) {
    throw new Error(`${path}: not a raw video container`);
  }
  if (payload[4] !== VERSION) {
    throw new Error(`${path}: unsupported raw video version ${payload[4]}`);
  }
  const frameCount = payload.readUInt32LE(5);
  const height = payload.readUInt32LE(9);
  const width = payload.readUInt32LE(13);
  const channels = payload.readUInt32LE(17);
  const expected = frameCount * height * width * channels;
  const pixels = payload.subarray(21);
  if (frameCount < 2 || channels !== 3 || pixels.length !== expected) {
    throw new Error(
      `${path}: malformed raw video (frames=${frameCount}, channels=${channels}, ` +
      `payload=${pixels.length}, expected=${expected})`);
  }
  return { frameCount, height, width, channels, pixels: new Uint8Array(pixels) };
}
