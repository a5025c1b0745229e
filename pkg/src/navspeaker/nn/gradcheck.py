"""Central finite-difference gradient checking.

``check_gradients`` evaluates a scalar-producing closure twice per sampled
parameter coordinate (p +/- h) and compares the quotient against the
reverse-mode gradient.  The closure must be deterministic and rebuild its
graph on every call; run it in float64 with h=1e-5 for meaningful numbers.
"""

from __future__ import annotations

import numpy as np


def _rel_err(a: float, b: float, floor: float = 1e-4) -> float:
    """|a-b| / max(|a|, |b|, floor).

    The floor makes the comparison atol+rtol style: central differences of a
    O(1) loss carry ~1e-11 absolute noise at h=1e-5 in float64, so gradients
    below the floor are compared absolutely (scaled), not relatively.
    """
    return abs(a - b) / max(abs(a), abs(b), floor)


def check_gradients(loss_fn, params, h: float = 1e-5, samples_per_param: int = 4,
                    rng: np.random.Generator | None = None):
    """Returns (max_rel_err, failures) over sampled coordinates of each param.

    failures lists (param_index, flat_index, analytic, numeric, rel_err)
    for coordinates whose relative error exceeds nothing here -- filtering
    against a tolerance is the caller's job.
    """
    rng = rng or np.random.default_rng(0)
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    grads = [None if p.grad is None else p.grad.copy() for p in params]

    records = []
    for pi, (p, g) in enumerate(zip(params, grads)):
        n = p.data.size
        count = min(samples_per_param, n)
        idxs = rng.choice(n, size=count, replace=False)
        flat = p.data.reshape(-1)
        for fi in idxs:
            fi = int(fi)
            orig = flat[fi]
            flat[fi] = orig + h
            up = loss_fn().item()
            flat[fi] = orig - h
            down = loss_fn().item()
            flat[fi] = orig
            numeric = (up - down) / (2.0 * h)
            analytic = 0.0 if g is None else float(g.reshape(-1)[fi])
            records.append((pi, fi, analytic, numeric, _rel_err(analytic, numeric)))
    for p in params:
        p.grad = None
    max_err = max((r[4] for r in records), default=0.0)
    return max_err, records


def assert_gradients_match(loss_fn, params, rel_tol: float = 1e-4, **kw):
    max_err, records = check_gradients(loss_fn, params, **kw)
    bad = [r for r in records if r[4] > rel_tol]
    if bad:
        lines = "\n".join(
            f"  param {pi} [{fi}]: analytic={a:.6e} numeric={n:.6e} rel={e:.3e}"
            for pi, fi, a, n, e in bad[:10]
        )
        raise AssertionError(f"gradient check failed ({len(bad)} coords):\n{lines}")
    return max_err
