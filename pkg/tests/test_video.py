import numpy as np
import pytest

from motionadapt.autodiff import Tape, Tensor, backward, mul, tsum
from motionadapt.video import (
    MmbParams,
    compute_differences,
    encode_video,
    encode_video_spatial_only,
    fuse,
    motion_stream,
    pair_count,
    select_pairs,
    spatial_stream,
)

from helpers import grad_of, rel_err


def brute_force_pairs(frames, max_step):
    return [(i, j) for i in range(1, frames + 1) for j in range(1, frames + 1)
            if i < j and j - i <= max_step]


def make_params(dim=8, frames=4, max_step=2, seed=0, randomize=False):
    rng = np.random.default_rng(seed)
    p = MmbParams.create(dim, frames, max_step, depth=1, heads=2, expansion=2, rng=rng)
    if randomize:
        for _, t in p.tensors():
            t.data[...] = rng.normal(0.0, 0.1, t.shape)
        for blk in p.motion_blocks + p.spatial_blocks:
            blk.ln1_gain.data[...] = 1.0 + 0.1 * rng.normal(size=dim)
            blk.ln2_gain.data[...] = 1.0 + 0.1 * rng.normal(size=dim)
    return p


# ---------------------------------------------------------------------------
# pair selection


def test_adjacent_pairs_only():
    sel = select_pairs(4, 1)
    assert sel.pairs == [(1, 2), (2, 3), (3, 4)]
    assert sel.count == 3


def test_full_window():
    sel = select_pairs(4, 3)
    assert sel.count == 6
    assert set(sel.pairs) == {(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)}


def test_count_formula_8_4():
    sel = select_pairs(8, 4)
    assert sel.count == 22 == 7 + 6 + 5 + 4


def test_matches_brute_force_for_all_small_sizes():
    for frames in range(2, 13):
        for max_step in range(1, frames):
            sel = select_pairs(frames, max_step)
            expected = brute_force_pairs(frames, max_step)
            assert set(sel.pairs) == set(expected), (frames, max_step)
            assert sel.count == pair_count(frames, max_step) == len(expected)
            assert sel.pairs == sorted(sel.pairs)
            assert len(set(sel.pairs)) == len(sel.pairs)
            assert all(1 <= j - i <= max_step for i, j in sel.pairs)


def test_step_out_of_range_rejected():
    with pytest.raises(ValueError):
        select_pairs(4, 0)
    with pytest.raises(ValueError):
        select_pairs(4, 4)
    with pytest.raises(ValueError):
        select_pairs(1, 1)


# ---------------------------------------------------------------------------
# differences


def test_identical_frames_give_zero_differences():
    frames = np.tile(np.arange(6, dtype=float), (5, 1))
    sel = select_pairs(5, 2)
    out = compute_differences(Tensor(frames), sel)
    assert np.array_equal(out.data, np.zeros((sel.count, 6)))


def test_two_frame_delta():
    a = np.array([1.0, 2.0, 3.0])
    delta = np.array([0.5, -0.5, 2.0])
    out = compute_differences(Tensor(np.stack([a, a + delta])), select_pairs(2, 1))
    assert np.allclose(out.data, delta[None, :])


def test_differences_match_double_loop_oracle():
    rng = np.random.default_rng(0)
    frames = rng.normal(size=(8, 512))
    sel = select_pairs(8, 4)
    out = compute_differences(Tensor(frames), sel).data
    k = 0
    for i in range(1, 9):
        for j in range(i + 1, min(i + 4, 8) + 1):
            assert np.array_equal(out[k], frames[j - 1] - frames[i - 1])
            k += 1
    assert k == 22


def test_differences_linear_in_frames():
    rng = np.random.default_rng(1)
    frames = rng.normal(size=(6, 8))
    sel = select_pairs(6, 3)
    base = compute_differences(Tensor(frames), sel).data
    scaled = compute_differences(Tensor(2.5 * frames), sel).data
    assert np.allclose(scaled, 2.5 * base)


def test_differences_validate_frame_count():
    with pytest.raises(ValueError):
        compute_differences(Tensor(np.zeros((3, 4))), select_pairs(5, 2))


# ---------------------------------------------------------------------------
# streams and fusion


def test_streams_are_identity_at_zero_init():
    rng = np.random.default_rng(2)
    p = make_params()
    diffs = rng.normal(size=(5, 8))
    frames = rng.normal(size=(4, 8))
    assert np.abs(motion_stream(Tensor(diffs), p).data - diffs).max() <= 1e-12
    assert np.abs(spatial_stream(Tensor(frames), p).data - frames).max() <= 1e-12


def test_nonzero_positions_break_permutation_invariance():
    rng = np.random.default_rng(3)
    p = make_params(randomize=True)
    frames = rng.normal(size=(4, 8))
    out1 = spatial_stream(Tensor(frames), p).data
    out2 = spatial_stream(Tensor(frames[::-1].copy()), p).data
    assert not np.allclose(out1.mean(axis=0), out2.mean(axis=0))


def test_positional_table_too_small_rejected():
    p = make_params(frames=4, max_step=2)
    with pytest.raises(ValueError, match="positional"):
        spatial_stream(Tensor(np.zeros((6, 8))), p)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_motion_stream_gradient_wrt_diffs(seed):
    rng = np.random.default_rng(seed)
    p = make_params(seed=seed + 20, randomize=True)
    diffs = rng.normal(size=(5, 8))
    w = rng.normal(size=(5, 8))

    def loss(d):
        return tsum(mul(motion_stream(d, p), Tensor(w)))

    d_t = Tensor(diffs, requires_grad=True)
    with Tape() as tape:
        out = loss(d_t)
    backward(tape, out)
    numeric = grad_of(loss, diffs)[0]
    assert rel_err(d_t.grad, numeric) < 1e-4


def test_fuse_zero_motion_gives_spatial_mean():
    rng = np.random.default_rng(4)
    spatial = rng.normal(size=(4, 8))
    out = fuse(Tensor(np.zeros((5, 8))), Tensor(spatial))
    assert np.allclose(out.data, spatial.mean(axis=0))


def test_fuse_constant_rows():
    m0 = np.array([1.0, -2.0, 0.5])
    s0 = np.array([0.25, 4.0, -1.0])
    out = fuse(Tensor(np.tile(m0, (6, 1))), Tensor(np.tile(s0, (3, 1))))
    assert np.allclose(out.data, m0 + s0)


def test_fuse_matches_independent_recomputation():
    rng = np.random.default_rng(5)
    m = rng.normal(size=(7, 16))
    s = rng.normal(size=(4, 16))
    out = fuse(Tensor(m), Tensor(s)).data
    assert np.abs(out - (m.mean(axis=0) + s.mean(axis=0))).max() < 1e-12


# ---------------------------------------------------------------------------
# full encoder


def test_constant_video_at_zero_init_gives_mean_frame():
    p = make_params(frames=4, max_step=2)
    frame = np.arange(8, dtype=float)
    frames = np.tile(frame, (4, 1))
    video, cues = encode_video(Tensor(frames), p, select_pairs(4, 2))
    assert np.allclose(video.data, frame)
    assert np.array_equal(cues.data, np.zeros((5, 8)))


def test_shapes_from_count_formula():
    rng = np.random.default_rng(6)
    p = make_params(dim=512, frames=8, max_step=4)
    video, cues = encode_video(Tensor(rng.normal(size=(8, 512))), p, select_pairs(8, 4))
    assert cues.shape == (22, 512)
    assert video.shape == (512,)


def test_gated_encoder_with_unit_gate_is_mean_frames_plus_mean_diffs():
    # residual-branch projections zero, positional tables zero, gate opened
    rng = np.random.default_rng(7)
    p = make_params(frames=4, max_step=2)
    p.fusion_gate.data[...] = 1.0
    frames = rng.normal(size=(4, 8))
    sel = select_pairs(4, 2)
    video, cues = encode_video(Tensor(frames), p, sel)
    diffs = np.stack([frames[j - 1] - frames[i - 1] for i, j in sel.pairs])
    assert np.abs(video.data - (frames.mean(axis=0) + diffs.mean(axis=0))).max() < 1e-12


def test_zero_gate_encoder_equals_spatial_only():
    rng = np.random.default_rng(8)
    p = make_params(randomize=True)
    p.fusion_gate.data[...] = 0.0
    frames = rng.normal(size=(4, 8))
    video, _ = encode_video(Tensor(frames), p, select_pairs(4, 2))
    spatial = encode_video_spatial_only(Tensor(frames), p)
    assert np.array_equal(video.data, spatial.data)


def test_frame_order_changes_output_with_nonzero_positions():
    rng = np.random.default_rng(9)
    p = make_params(randomize=True)
    frames = rng.normal(size=(4, 8))
    sel = select_pairs(4, 2)
    v1, _ = encode_video(Tensor(frames), p, sel)
    v2, _ = encode_video(Tensor(frames[::-1].copy()), p, sel)
    assert not np.allclose(v1.data, v2.data)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_encoder_end_to_end_gradients(seed):
    rng = np.random.default_rng(seed)
    p = make_params(seed=seed + 30, randomize=True)
    sel = select_pairs(4, 2)
    frames = rng.normal(size=(4, 8))
    w = rng.normal(size=8)
    names = [n for n, _ in p.tensors()]

    def loss(frames_t, *param_tensors):
        for (name, _), pt in zip(p.tensors(), param_tensors):
            parts = name.split(".")
            if parts[1] in ("pos_motion", "pos_spatial", "fusion_gate"):
                setattr(p, parts[1], pt)
            else:
                blk = (p.motion_blocks if parts[1].startswith("motion") else p.spatial_blocks)[0]
                setattr(blk, parts[2], pt)
        video, _ = encode_video(frames_t, p, sel)
        return tsum(mul(video, Tensor(w)))

    arrays = [frames] + [t.data.copy() for _, t in p.tensors()]
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        out = loss(*tensors)
    backward(tape, out)
    numeric = grad_of(loss, *arrays)
    for name, t, f in zip(["frames"] + names, tensors, numeric):
        assert t.grad is not None, name
        assert rel_err(t.grad, f) < 1e-4, name
