import os

import numpy as np
import pytest

from navspeaker.nn import tensor as T
from navspeaker.nn.archive import load_archive, save_archive
from navspeaker.nn.layers import Parameter
from navspeaker.nn.optim import AdamW, clip_global_norm


def test_adamw_pure_decay_with_zero_gradient():
    p = Parameter(np.full(4, 2.0))
    opt = AdamW([p], lr=0.5, weight_decay=0.1)
    p.grad = np.zeros(4)
    opt.step()
    assert np.allclose(p.data, 2.0 * (1.0 - 0.05), atol=1e-12)


def test_adamw_first_step_matches_closed_form():
    # with wd=0, one step moves each coordinate by ~lr * sign(g)
    p = Parameter(np.array([1.0, -1.0, 0.5]))
    g = np.array([0.3, -0.2, 0.9])
    opt = AdamW([p], lr=1e-2, weight_decay=0.0)
    p.grad = g.copy()
    before = p.data.copy()
    opt.step()
    mhat = (0.1 * g) / (1 - 0.9)
    vhat = (0.001 * g * g) / (1 - 0.999)
    expect = before - 1e-2 * mhat / (np.sqrt(vhat) + 1e-8)
    assert np.allclose(p.data, expect, atol=1e-10)


def test_adamw_missing_gradient_is_zero():
    p = Parameter(np.array([3.0]))
    opt = AdamW([p], lr=0.1, weight_decay=0.0)
    p.grad = None
    opt.step()
    assert np.allclose(p.data, 3.0)


def test_clip_global_norm_scales_to_bound():
    a = Parameter(np.zeros(3))
    b = Parameter(np.zeros(2))
    a.grad = np.array([3.0, 0.0, 0.0])
    b.grad = np.array([0.0, 4.0])
    norm = clip_global_norm([a, b], max_norm=1.0)
    assert abs(norm - 5.0) < 1e-12
    total = np.sqrt((a.grad**2).sum() + (b.grad**2).sum())
    assert abs(total - 1.0) < 1e-12


def test_clip_noop_below_bound():
    a = Parameter(np.zeros(2))
    a.grad = np.array([0.3, 0.4])
    clip_global_norm([a], max_norm=5.0)
    assert np.allclose(a.grad, [0.3, 0.4])


def test_archive_bit_exact_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    arrays = [
        ("enc.w", rng.standard_normal((3, 4)).astype(np.float32)),
        ("enc.b", rng.standard_normal(4).astype(np.float64)),
        ("steps", np.array([7], dtype=np.int64)),
    ]
    path = tmp_path / "model.archive"
    save_archive(path, arrays)
    loaded = load_archive(path)
    assert list(loaded) == ["enc.w", "enc.b", "steps"]
    for name, arr in arrays:
        assert loaded[name].dtype == arr.dtype
        assert loaded[name].tobytes() == arr.tobytes()


def test_archive_rejects_garbage(tmp_path):
    path = tmp_path / "bogus.archive"
    path.write_bytes(b"not an archive at all")
    with pytest.raises(ValueError):
        load_archive(path)


def test_archive_file_is_deterministic(tmp_path):
    arr = [("x", np.arange(6, dtype=np.float32).reshape(2, 3))]
    p1, p2 = tmp_path / "a1", tmp_path / "a2"
    save_archive(p1, arr)
    save_archive(p2, arr)
    assert p1.read_bytes() == p2.read_bytes()
