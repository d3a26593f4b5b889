/**
 * Deterministic stand-in for a frozen pretrained image tower.
 *
 * The "weights" are a pseudo-random projection matrix derived from the
 * backbone identifier string, so the same identifier always produces the
 * same features on every platform. Real checkpoints are out of scope for
 * the exporter; the identifier is recorded in the manifest provenance so
 * downstream consumers know what produced the features.
 */

export interface Backbone {
  id: string;
  inputDim: number;
  outputDim: number;
  project(patch: Float64Array): Float32Array;
}

function fnv1a32(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

/** mulberry32: tiny deterministic PRNG over a 32-bit state. */
function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function createBackbone(id: string, inputDim: number,
                               outputDim: number): Backbone {
  const rand = mulberry32(fnv1a32(`${id}:${inputDim}:${outputDim}`));
  const scale = 1.0 / Math.sqrt(inputDim);
  const weights = new Float64Array(outputDim * inputDim);
  for (let i = 0; i < weights.length; i++) {
    // uniform in [-scale, scale]; plenty for a feature stand-in
    weights[i] = (rand() * 2 - 1) * scale;
  }
  return {
    id,
    inputDim,
    outputDim,
    project(patch: Float64Array): Float32Array {
      if (patch.length !== inputDim) {
        throw new Error(
          `backbone ${id} expects input dim ${inputDim}, got ${patch.length}`);
      }
      const out = new Float32Array(outputDim);
      for (let row = 0; row < outputDim; row++) {
        let acc = 0;
        const base = row * inputDim;
        for (let col = 0; col < inputDim; col++) {
          acc += weights[base + col] * patch[col];
        }
        out[row] = Math.fround(acc);
      }
      return out;
    },
  };
}
