"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time. Set ``NEWSGRAPH_DISABLE_NUMBA=1``
to force the numpy path (also used automatically when numba is missing).
Both backends stay importable as ``kernels.numpy_backend`` and
``kernels.numba_backend`` (the latter is ``None`` without numba) so tests and
benchmarks can compare them directly.
"""

import os

import numpy as np

from . import _numpy as numpy_backend

_FLAG = "NEWSGRAPH_DISABLE_NUMBA"


def _load_numba():
    if os.environ.get(_FLAG, "").strip().lower() in ("1", "true", "yes", "on"):
        return None
    try:
        from . import _numba
    except ImportError:
        return None
    return _numba


numba_backend = _load_numba()
backend = numba_backend if numba_backend is not None else numpy_backend
BACKEND_NAME = "numba" if numba_backend is not None else "numpy"


def lstm_forward(x, wx, wh, b):
    return backend.lstm_forward(
        np.ascontiguousarray(x), np.ascontiguousarray(wx), np.ascontiguousarray(wh),
        np.ascontiguousarray(b),
    )


def lstm_backward(dh_last, x, wx, wh, h, c, tc, gates):
    return backend.lstm_backward(
        np.ascontiguousarray(dh_last), np.ascontiguousarray(x), np.ascontiguousarray(wx),
        np.ascontiguousarray(wh), h, c, tc, gates,
    )


def scatter_add_rows(out, idx, src):
    return backend.scatter_add_rows(
        out, np.ascontiguousarray(idx, dtype=np.int64), np.ascontiguousarray(src)
    )


def forward_fill(values, present):
    return backend.forward_fill(
        np.ascontiguousarray(values, dtype=np.float64), np.ascontiguousarray(present, dtype=np.bool_)
    )


def max_drawdown(equity):
    return float(backend.max_drawdown(np.ascontiguousarray(equity, dtype=np.float64)))


def confusion_counts(true, pred, n_classes=3):
    return backend.confusion_counts(
        np.ascontiguousarray(true, dtype=np.int64), np.ascontiguousarray(pred, dtype=np.int64),
        n_classes,
    )


def portfolio_returns(weights, returns):
    return backend.portfolio_returns(
        np.ascontiguousarray(weights, dtype=np.float64), np.ascontiguousarray(returns, dtype=np.float64)
    )
