import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navspeaker.errors import NonScalarLoss, ShapeError
from navspeaker.nn import tensor as T
from navspeaker.nn.gradcheck import assert_gradients_match
from navspeaker.nn.layers import Parameter
from navspeaker.nn.tensor import Tensor


def rand(shape, seed=0):
    return np.random.default_rng(seed).standard_normal(shape)


def test_quadratic_gradient_is_exact():
    p = Parameter(rand(6, seed=1))
    loss = T.mul(T.tsum(T.mul(p, p)), 0.5)
    loss.backward()
    assert np.allclose(p.grad, p.data, atol=1e-12)


def test_backward_requires_scalar():
    p = Parameter(rand((2, 2)))
    with pytest.raises(NonScalarLoss):
        T.mul(p, 2.0).backward()


def test_matmul_shape_errors():
    a, b = Tensor(rand((2, 3))), Tensor(rand((4, 5)))
    with pytest.raises(ShapeError):
        T.matmul(a, b)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_primitive_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    W = Parameter(rng.standard_normal((5, 4)))
    b = Parameter(rng.standard_normal(5))
    v = Parameter(rng.standard_normal((3, 5)))
    x = Tensor(rng.standard_normal((3, 4)))

    def loss():
        y = T.affine(x, W, b)
        s = T.softmax(y, axis=-1)
        z = T.relu(T.sub(T.tanh(y), T.sigmoid(s)))
        w = T.clamp(T.mul(z, v), -0.7, 0.7)
        ls = T.log_softmax(T.concat([y, w], axis=1), axis=-1)
        picked = T.pick(T.exp(T.mul(ls, 0.1)), [0, 1, 2], [1, 4, 7])
        st_ = T.stack([T.tmean(w, axis=0), T.tmean(y, axis=0)], axis=0)
        return T.add(T.tmean(T.log(T.add(T.mul(picked, picked), 1.0))),
                     T.tmean(T.div(st_, 2.0)))

    assert_gradients_match(loss, [W, b, v], rel_tol=1e-4, samples_per_param=6,
                           rng=np.random.default_rng(seed))


def test_gather_and_slice_gradients():
    rng = np.random.default_rng(3)
    E = Parameter(rng.standard_normal((7, 4)))

    def loss():
        rows = T.gather_rows(E, [1, 3, 3, 5])
        left = T.slice_cols(rows, 0, 2)
        win = T.unfold_rows(rows, 2)
        return T.add(T.tmean(T.mul(left, left)), T.tmean(T.tanh(win)))

    assert_gradients_match(loss, [E], rel_tol=1e-4, samples_per_param=10,
                           rng=np.random.default_rng(4))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(2, 9))
def test_softmax_rows_are_distributions(seed, rows, cols):
    x = np.random.default_rng(seed).standard_normal((rows, cols)) * 10
    y = T.softmax(Tensor(x), axis=-1).data
    assert np.all(y >= 0)
    assert np.allclose(y.sum(axis=1), 1.0, atol=1e-6)


def test_softmax_stable_at_large_logits():
    x = Tensor(np.array([[30.0, -30.0, 0.0], [1000.0, 999.0, -1000.0]]))
    y = T.softmax(x, axis=-1).data
    assert np.all(np.isfinite(y))
    assert np.allclose(y.sum(axis=1), 1.0, atol=1e-9)


def test_lstm_gates_zero_state_fixpoint():
    # all-zero preactivations and cell state: h = 0.5 * tanh(0.5 * 0) = 0
    z = Tensor(np.zeros((1, 12)))
    c = Tensor(np.zeros((1, 3)))
    h, c_out = T.lstm_gates(z, c)
    assert np.allclose(h.data, 0.0) and np.allclose(c_out.data, 0.0)


def test_no_grad_blocks_graph():
    p = Parameter(rand(4))
    with T.no_grad():
        out = T.mul(p, 2.0)
    assert not out.requires_grad


def test_forward_determinism_bitwise():
    def run():
        rng = np.random.default_rng(9)
        W = Parameter(rng.standard_normal((4, 4)).astype(np.float32))
        x = Tensor(rng.standard_normal((2, 4)).astype(np.float32))
        loss = T.tmean(T.softmax(T.affine(x, W), axis=-1))
        loss.backward()
        return loss.data.copy(), W.grad.copy()

    (l1, g1), (l2, g2) = run(), run()
    assert l1.tobytes() == l2.tobytes()
    assert g1.tobytes() == g2.tobytes()
