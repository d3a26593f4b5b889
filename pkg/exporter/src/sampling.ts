/**
 * Clip and crop sampling for the multi-view evaluation protocol.
 *
 * A video is split into `clips` equal temporal segments; within each
 * segment `framesPerClip` frames are taken at uniform stride. Spatially,
 * three fixed square crops (left, center, right along the longer axis)
 * give the crop views. View ids enumerate as
 * clipIndex * crops + cropIndex.
 */

import { RawVideo } from './format';

export interface CropWindow {
  top: number;
  left: number;
  size: number;
}

/** Frame indices for one clip segment, uniformly strided. */
export function clipFrameIndices(
  totalFrames: number,
  clips: number,
  clipIndex: number,
  framesPerClip: number,
): number[] {
  if (clipIndex < 0 || clipIndex >= clips) {
    throw new Error(`clip index ${clipIndex} out of range [0, ${clips})`);
  }
  const start = (totalFrames * clipIndex) / clips;
  const length = totalFrames / clips;
  const indices: number[] = [];
  for (let i = 0; i < framesPerClip; i++) {
    const t = Math.floor(start + ((i + 0.5) * length) / framesPerClip);
    indices.push(Math.min(totalFrames - 1, t));
  }
  return indices;
}

/**
 * Three fixed square crop windows: left/top, center, right/bottom along
 * whichever axis is longer. The square side is min(height, width, maxSize).
 */
export function cropWindows(height: number, width: number, maxSize: number,
                            crops: number): CropWindow[] {
  const size = Math.min(height, width, maxSize);
  const windows: CropWindow[] = [];
  const spanY = height - size;
  const spanX = width - size;
  for (let c = 0; c < crops; c++) {
    const frac = crops === 1 ? 0.5 : c / (crops - 1);
    windows.push({
      top: Math.round(spanY * (spanY >= spanX ? frac : 0.5)),
      left: Math.round(spanX * (spanX > spanY ? frac : 0.5)),
      size,
    });
  }
  return windows;
}

/**
 * Average-pool one cropped frame onto a grid x grid x channels patch
 * summary with values scaled to [0, 1]. This is the deterministic
 * "pixel" input handed to the stand-in backbone.
 */
export function pooledCrop(video: RawVideo, frame: number, window: CropWindow,
                           grid: number): Float64Array {
  const { height, width, channels } = video;
  const out = new Float64Array(grid * grid * channels);
  const counts = new Float64Array(grid * grid);
  const frameOffset = frame * height * width * channels;
  for (let y = 0; y < window.size; y++) {
    const gy = Math.min(grid - 1, Math.floor((y * grid) / window.size));
    const rowOffset = frameOffset + ((window.top + y) * width + window.left) * channels;
    for (let x = 0; x < window.size; x++) {
      const gx = Math.min(grid - 1, Math.floor((x * grid) / window.size));
      const cell = gy * grid + gx;
      counts[cell] += 1;
      const px = rowOffset + x * channels;
      for (let ch = 0; ch < channels; ch++) {
        out[cell * channels + ch] += video.pixels[px + ch];
      }
    }
  }
  for (let cell = 0; cell < grid * grid; cell++) {
    const n = counts[cell] * 255;
    for (let ch = 0; ch < channels; ch++) {
      out[cell * channels + ch] /= n;
    }
  }
  return out;
}
