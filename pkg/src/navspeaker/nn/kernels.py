"""Kernel dispatch: compiled extension if present, numpy fallback otherwise.

Set NAVSPEAKER_PURE=1 to force the numpy implementations (used by the
benchmark and by CI runs that want to exercise the fallback).
"""

import os

if os.environ.get("NAVSPEAKER_PURE"):
    from . import kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import kernels_py as _impl

IS_COMPILED = _impl.IS_COMPILED

sigmoid = _impl.sigmoid
softmax2d = _impl.softmax2d
lstm_fwd = _impl.lstm_fwd
lstm_bwd_h = _impl.lstm_bwd_h
lstm_bwd_c = _impl.lstm_bwd_c
adamw_update = _impl.adamw_update
