"""Pure-numpy implementations of the hot kernels.

Same contracts as the compiled extension in ``_kernels.pyx``; the dispatcher
in ``kernels.py`` picks whichever is available.  Gate layout for LSTM
pre-activations is ``[i, f, g, o]`` along the last axis.
"""

import numpy as np

IS_COMPILED = False


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax2d(x):
    """Row-wise stable softmax of a 2-D array."""
    m = x.max(axis=1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=1, keepdims=True)


def lstm_fwd(z, c_prev):
    """Fused LSTM gate math.

    z: (B, 4D) pre-activations, c_prev: (B, D).
    Returns (h, c, gates, tc) with gates = post-activation [i, f, g, o]
    stacked as (B, 4D) and tc = tanh(c), all needed by the backward pair.
    """
    d = c_prev.shape[1]
    i = sigmoid(z[:, :d])
    f = sigmoid(z[:, d : 2 * d])
    g = np.tanh(z[:, 2 * d : 3 * d])
    o = sigmoid(z[:, 3 * d :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    gates = np.concatenate([i, f, g, o], axis=1)
    return h, c, gates, tc


def lstm_bwd_h(gh, gates, tc):
    """Backward of h = o * tanh(c): returns (dz_o, dc)."""
    d = tc.shape[1]
    o = gates[:, 3 * d :]
    dz_o = gh * tc * o * (1.0 - o)
    dc = gh * o * (1.0 - tc * tc)
    return dz_o, dc


def lstm_bwd_c(gc, gates, c_prev):
    """Backward of c = f*c_prev + i*g: returns (dz_ifg, dc_prev)."""
    d = c_prev.shape[1]
    i = gates[:, :d]
    f = gates[:, d : 2 * d]
    g = gates[:, 2 * d : 3 * d]
    dz_i = gc * g * i * (1.0 - i)
    dz_f = gc * c_prev * f * (1.0 - f)
    dz_g = gc * i * (1.0 - g * g)
    dc_prev = gc * f
    return np.concatenate([dz_i, dz_f, dz_g], axis=1), dc_prev


def adamw_update(p, g, m, v, t, lr, beta1, beta2, eps, weight_decay):
    """In-place decoupled-weight-decay Adam step on flat float arrays."""
    if weight_decay != 0.0:
        p -= lr * weight_decay * p
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)
