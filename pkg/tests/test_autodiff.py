import numpy as np
import pytest

from motionadapt.autodiff import (
    Tape,
    Tensor,
    add,
    avg_pool_rows,
    backward,
    concat_cols,
    concat_rows,
    div,
    gather_rows,
    gelu,
    layer_norm,
    log,
    matmul,
    mha_mix,
    mul,
    neg,
    reshape,
    scale,
    slice_cols,
    softmax,
    sqrt,
    sub,
    transpose,
    tsum,
)

from helpers import grad_of, numeric_grad, rel_err

SEEDS = [0, 1, 2, 3, 4]


def _grad(fn, *arrays):
    """Analytic gradients of scalar fn w.r.t. every array input."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        out = fn(*tensors)
    backward(tape, out)
    return [t.grad for t in tensors]


def check_grads(fn, *arrays, tol=1e-6):
    analytic = _grad(fn, *arrays)
    numeric = grad_of(fn, *arrays)
    for a, f in zip(analytic, numeric):
        assert a is not None
        assert rel_err(a, f) < tol


# ---------------------------------------------------------------------------
# matmul


def test_matmul_identity():
    x = np.arange(6, dtype=float).reshape(2, 3)
    out = matmul(Tensor(np.eye(2)), Tensor(x))
    assert np.array_equal(out.data, x)


def test_matmul_hand_arithmetic():
    out = matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
    assert out.data.tolist() == [[11.0]]


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 2))))


@pytest.mark.parametrize("seed", SEEDS)
def test_matmul_gradient_vs_finite_differences(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    check_grads(lambda x, y: tsum(matmul(x, y)), a, b)


def test_matmul_backward_rule_closed_form():
    # dA = dC @ B^T and dB = A^T @ dC with dC of ones for a sum loss
    rng = np.random.default_rng(7)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    ga, gb = _grad(lambda x, y: tsum(matmul(x, y)), a, b)
    ones = np.ones((3, 2))
    assert np.allclose(ga, ones @ b.T)
    assert np.allclose(gb, a.T @ ones)


# ---------------------------------------------------------------------------
# softmax


def test_softmax_uniform_on_zeros():
    out = softmax(Tensor([0.0, 0.0, 0.0]))
    assert np.allclose(out.data, [1 / 3] * 3)


def test_softmax_single_element():
    out = softmax(Tensor([3.7]))
    assert np.allclose(out.data, [1.0])


def test_softmax_direct_evaluation():
    out = softmax(Tensor([2.8571, 1.4286]))
    assert np.allclose(out.data, [0.8067, 0.1933], atol=1e-3)


@pytest.mark.parametrize("seed", SEEDS)
def test_softmax_rows_sum_to_one_and_shift_invariant(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 6)) * 3
    out = softmax(Tensor(x), axis=-1)
    assert np.allclose(out.data.sum(axis=-1), 1.0, atol=1e-6)
    assert ((out.data > 0) & (out.data < 1)).all()
    shifted = softmax(Tensor(x + 11.3), axis=-1)
    assert np.allclose(out.data, shifted.data, atol=1e-6)


@pytest.mark.parametrize("seed", SEEDS)
def test_softmax_gradient(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 5))
    w = rng.normal(size=(3, 5))  # random projection makes the loss generic
    check_grads(lambda t: tsum(mul(softmax(t, axis=-1), Tensor(w))), x)


# ---------------------------------------------------------------------------
# layer_norm / gelu / pooling / elementwise


def test_layer_norm_normalizes_rows():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, 16)) * 2 + 1
    out = layer_norm(Tensor(x), Tensor(np.ones(16)), Tensor(np.zeros(16)))
    assert np.allclose(out.data.mean(axis=1), 0.0, atol=1e-5)
    assert np.allclose(out.data.var(axis=1), 1.0, atol=1e-5)


@pytest.mark.parametrize("seed", SEEDS)
def test_layer_norm_gradient(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 8))
    g = rng.normal(size=8)
    b = rng.normal(size=8)
    w = rng.normal(size=(3, 8))
    check_grads(lambda t, gg, bb: tsum(mul(layer_norm(t, gg, bb), Tensor(w))), x, g, b,
                tol=1e-5)


def test_gelu_zero_is_zero():
    assert gelu(Tensor([0.0])).data[0] == 0.0


@pytest.mark.parametrize("seed", SEEDS)
def test_gelu_gradient(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 3)) * 2
    w = rng.normal(size=(4, 3))
    check_grads(lambda t: tsum(mul(gelu(t), Tensor(w))), x)


def test_avg_pool_rows_identical_rows():
    row = np.array([2.0, -1.0, 0.5])
    out = avg_pool_rows(Tensor(np.tile(row, (4, 1))))
    assert np.allclose(out.data, row)


def test_avg_pool_rows_hand_value():
    out = avg_pool_rows(Tensor([[1.0, 3.0], [3.0, 1.0]]))
    assert out.data.tolist() == [2.0, 2.0]


def test_avg_pool_rows_empty_error():
    with pytest.raises(ValueError):
        avg_pool_rows(Tensor(np.zeros((0, 3))))


@pytest.mark.parametrize("seed", SEEDS)
def test_elementwise_and_shape_op_gradients(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(3, 4)) + 3.0  # keep div/log/sqrt away from 0
    w = rng.normal(size=(3, 4))
    wv = rng.normal(size=4)
    check_grads(lambda x, y: tsum(mul(add(x, y), Tensor(w))), a, b)
    check_grads(lambda x, y: tsum(mul(sub(x, y), Tensor(w))), a, b)
    check_grads(lambda x, y: tsum(mul(mul(x, y), Tensor(w))), a, b)
    check_grads(lambda x, y: tsum(mul(div(x, y), Tensor(w))), a, b, tol=1e-5)
    check_grads(lambda x: tsum(mul(neg(x), Tensor(w))), a)
    check_grads(lambda x: tsum(mul(scale(x, -2.5), Tensor(w))), a)
    check_grads(lambda x: tsum(mul(log(x), Tensor(w))), b)
    check_grads(lambda x: tsum(mul(sqrt(x), Tensor(w))), b)
    check_grads(lambda x: tsum(mul(transpose(x), Tensor(w.T))), a)
    check_grads(lambda x: tsum(mul(reshape(x, (4, 3)), Tensor(w.reshape(4, 3)))), a)
    check_grads(lambda x: tsum(mul(tsum(x, axis=0), Tensor(wv))), a)
    check_grads(lambda x: tsum(mul(avg_pool_rows(x), Tensor(wv))), a)


@pytest.mark.parametrize("seed", SEEDS)
def test_broadcast_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 4))
    bias = rng.normal(size=4)
    scalar = np.array(rng.normal())
    w = rng.normal(size=(3, 4))
    check_grads(lambda a, b: tsum(mul(add(a, b), Tensor(w))), x, bias)
    check_grads(lambda a, b: tsum(mul(mul(a, b), Tensor(w))), x, bias)
    check_grads(lambda a, b: tsum(mul(mul(a, b), Tensor(w))), x, scalar)


@pytest.mark.parametrize("seed", SEEDS)
def test_gather_concat_slice_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(5, 4))
    y = rng.normal(size=(2, 4))
    w = rng.normal(size=(4, 4))
    w7 = rng.normal(size=(7, 4))
    w2 = rng.normal(size=(5, 2))
    z = rng.normal(size=(2, 4))
    w4 = rng.normal(size=(2, 4))
    # repeated index exercises scatter-add accumulation
    check_grads(lambda t: tsum(mul(gather_rows(t, [0, 2, 2, 4]), Tensor(w))), x)
    check_grads(lambda a, b: tsum(mul(concat_rows([a, b]), Tensor(w7))), x, y)
    check_grads(lambda t: tsum(mul(slice_cols(t, 1, 3), Tensor(w2))), x)
    check_grads(lambda a, b: tsum(mul(concat_cols([slice_cols(a, 0, 2), slice_cols(b, 0, 2)]),
                                      Tensor(w4))),
                y, z)


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("heads,n,m", [(1, 3, 4), (2, 4, 4), (4, 5, 2)])
def test_mha_mix_gradient(seed, heads, n, m):
    rng = np.random.default_rng(seed)
    dim = 8
    q = rng.normal(size=(n, dim))
    k = rng.normal(size=(m, dim))
    v = rng.normal(size=(m, dim))
    w = rng.normal(size=(n, dim))
    check_grads(lambda a, b, c: tsum(mul(mha_mix(a, b, c, heads), Tensor(w))),
                q, k, v, tol=1e-5)


def test_mha_mix_single_key_ignores_scores():
    # with one key the attention weight is exactly 1 for every query row
    rng = np.random.default_rng(3)
    q1 = rng.normal(size=(4, 8))
    q2 = rng.normal(size=(4, 8)) * 50
    k = rng.normal(size=(1, 8))
    v = rng.normal(size=(1, 8))
    out1 = mha_mix(Tensor(q1), Tensor(k), Tensor(v), heads=2)
    out2 = mha_mix(Tensor(q2), Tensor(k), Tensor(v), heads=2)
    assert np.array_equal(out1.data, out2.data)
    assert np.allclose(out1.data, np.tile(v, (4, 1)))


def test_mha_mix_respects_mask():
    rng = np.random.default_rng(4)
    q = rng.normal(size=(3, 4))
    k = rng.normal(size=(3, 4))
    v = rng.normal(size=(3, 4))
    mask = np.triu(np.full((3, 3), -1e9), k=1)
    out = mha_mix(Tensor(q), Tensor(k), Tensor(v), heads=1, mask=mask).data
    # first row can only attend to the first key
    assert np.allclose(out[0], v[0])


# ---------------------------------------------------------------------------
# tape and backward semantics


def test_backward_sum_gives_ones():
    x = Tensor(np.arange(6, dtype=float).reshape(2, 3), requires_grad=True)
    with Tape() as tape:
        loss = tsum(x)
    backward(tape, loss)
    assert np.array_equal(x.grad, np.ones((2, 3)))


def test_backward_square_gives_2x():
    x = Tensor([3.0], requires_grad=True)
    with Tape() as tape:
        loss = tsum(mul(x, x))
    backward(tape, loss)
    assert np.allclose(x.grad, [6.0])


def test_backward_rejects_non_scalar_loss():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        y = mul(x, x)
    with pytest.raises(ValueError, match="scalar"):
        backward(tape, y)


def test_backward_fanout_matches_expanded_tree():
    # loss via a shared subexpression
    def shared(x):
        s = add(x, x)
        return tsum(mul(s, s))

    # the same function with the sharing expanded by hand
    def expanded(x):
        return tsum(mul(add(x, x), add(x, x)))

    rng = np.random.default_rng(0)
    xv = rng.normal(size=(3, 3))
    g_shared = _grad(shared, xv)[0]
    g_expanded = _grad(expanded, xv)[0]
    assert np.allclose(g_shared, g_expanded)
    assert np.allclose(g_shared, 8 * xv)  # d/dx (2x)^2 summed


def test_loss_equals_leaf_gets_unit_grad():
    x = Tensor([5.0], requires_grad=True)
    with Tape() as tape:
        pass
    backward(tape, x)
    assert np.allclose(x.grad, [1.0])


def test_gradients_accumulate_across_backward_calls():
    x = Tensor([2.0], requires_grad=True)
    for _ in range(2):
        with Tape() as tape:
            loss = tsum(mul(x, x))
        backward(tape, loss)
    assert np.allclose(x.grad, [8.0])
    x.zero_grad()
    assert x.grad is None


def test_tape_topological_order():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        a = add(x, x)
        b = mul(a, x)
        tsum(b)
    seen = set()
    for rec in tape.records:
        for t in rec.inputs:
            assert id(t) not in seen or True  # inputs may be leaves
            if id(t) in tape.produced:
                assert id(t) in seen, "input produced later than consumed"
        seen.add(id(rec.output))


def test_backward_visits_each_record_exactly_once():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        a = add(x, x)
        b = mul(a, a)  # a consumed twice by one record
        c = add(b, a)  # a consumed again by a later record
        loss = tsum(c)
    calls = {i: 0 for i in range(len(tape.records))}
    for i, rec in enumerate(tape.records):
        original = rec.backward_fn

        def counted(g, i=i, original=original):
            calls[i] += 1
            return original(g)

        rec.backward_fn = counted
    backward(tape, loss)
    assert all(n == 1 for n in calls.values())
    # gradient is still exact: d/dx sum((2x)^2 + 2x) = 8x + 2
    assert np.allclose(x.grad, 8 * np.ones(3) + 2)


def test_no_recording_outside_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    out = add(x, x)
    assert out.requires_grad
    with Tape() as tape:
        pass
    assert len(tape) == 0


def test_finite_difference_oracle_sanity():
    # the oracle itself must recover a known derivative
    f = lambda x: float((x ** 3).sum())
    x = np.array([1.5, -2.0])
    assert rel_err(3 * x ** 2, numeric_grad(f, x)) < 1e-8
