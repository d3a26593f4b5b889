/**
 * Export pipeline: raw videos -> multi-clip multi-crop frame features in
 * the primary package's container format, plus a dataset manifest.
 */

import { mkdirSync, readFileSync, writeFileSync } from 'fs';
import { join, resolve } from 'path';

import { createBackbone } from './backbone';
import { FeatureRecord, encodeFeatureFile, readRawVideo } from './format';
import { clipFrameIndices, cropWindows, pooledCrop } from './sampling';

export interface VideoEntry {
  /** path to the .rvid file, relative to the listing file */
  path: string;
  label: string;
  id: string;
}

export interface ExportJob {
  videos: VideoEntry[];
  /** directory paths in `videos` are resolved against */
  baseDir: string;
  framesPerClip: number;
  clipsPerVideo: number;
  cropsPerClip: number;
  outputDir: string;
  backboneId: string;
  outputDim: number;
  cropSize: number;
  /** patch grid fed to the backbone; input dim is grid*grid*3 */
  grid?: number;
}

export interface ExportResult {
  records: number;
  skipped: string[];
  classes: string[];
  featurePath: string;
  manifestPath: string;
}

export function loadVideoListing(path: string): VideoEntry[] {
  const entries = JSON.parse(readFileSync(path, 'utf-8'));
  if (!Array.isArray(entries) || entries.length === 0) {
    throw new Error(`${path}: expected a non-empty JSON array of videos`);
  }
  return entries.map((e, i) => {
    if (typeof e.path !== 'string' || typeof e.label !== 'string') {
      throw new Error(`${path}: entry ${i} needs string "path" and "label"`);
    }
    return { path: e.path, label: e.label, id: e.id ?? `video_${i}` };
  });
}

export function runExport(job: ExportJob): ExportResult {
  if (job.framesPerClip < 2) {
    throw new Error(`frames per clip must be at least 2, got ${job.framesPerClip}`);
  }
  if (job.clipsPerVideo < 1 || job.cropsPerClip < 1) {
    throw new Error('clips and crops per video must be positive');
  }
  const grid = job.grid ?? 8;
  const inputDim = grid * grid * 3;
  const backbone = createBackbone(job.backboneId, inputDim, job.outputDim);

  const classes = [...new Set(job.videos.map(v => v.label))].sort();
  const labelIndex = new Map(classes.map((c, i) => [c, i]));

  const records: FeatureRecord[] = [];
  const skipped: string[] = [];
  for (const video of job.videos) {
    const fullPath = resolve(job.baseDir, video.path);
    let raw;
    try {
      raw = readRawVideo(fullPath);
    } catch (err) {
      console.warn(`skipping undecodable video ${video.id}: ${(err as Error).message}`);
      skipped.push(video.id);
      continue;
    }
    const windows = cropWindows(raw.height, raw.width, job.cropSize, job.cropsPerClip);
    for (let clip = 0; clip < job.clipsPerVideo; clip++) {
      const frameIds = clipFrameIndices(raw.frameCount, job.clipsPerVideo, clip,
                                        job.framesPerClip);
      for (let crop = 0; crop < job.cropsPerClip; crop++) {
        const frames = new Float32Array(job.framesPerClip * job.outputDim);
        frameIds.forEach((frame, t) => {
          const patch = pooledCrop(raw, frame, windows[crop], grid);
          const features = backbone.project(patch);
          if (features.length !== job.outputDim) {
            throw new Error(
              `backbone produced dim ${features.length}, expected ${job.outputDim}`);
          }
          frames.set(features, t * job.outputDim);
        });
        records.push({
          videoId: video.id,
          viewId: clip * job.cropsPerClip + crop,
          labelIndex: labelIndex.get(video.label)!,
          frames,
          frameCount: job.framesPerClip,
          dim: job.outputDim,
        });
      }
    }
  }
  if (records.length === 0) {
    throw new Error('no videos could be decoded; nothing to export');
  }

  mkdirSync(job.outputDir, { recursive: true });
  const featurePath = join(job.outputDir, 'features.mcfv');
  writeFileSync(featurePath, encodeFeatureFile(records));

  const manifest = {
    classes,
    dim: job.outputDim,
    splits: {
      train: [],
      test: records.map((_, i) => ({ file: 'features.mcfv', index: i })),
    },
    provenance: {
      exporter: 'motionadapt-exporter',
      backbone: backbone.id,
      crop_size: job.cropSize,
      clips_per_video: job.clipsPerVideo,
      crops_per_clip: job.cropsPerClip,
      frames_per_clip: job.framesPerClip,
      view_id_rule: 'clip_index * crops_per_clip + crop_index',
    },
  };
  const manifestPath = join(job.outputDir, 'manifest.json');
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');

  return {
    records: records.length,
    skipped,
    classes,
    featurePath,
    manifestPath,
  };
}
